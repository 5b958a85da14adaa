#include <catch_amalgamated.hpp>

#include <random>

#include "slowfast/config.hpp"
#include "slowfast/model.hpp"

using namespace slowfast;
using Catch::Matchers::WithinAbs;

TEST_CASE("hamiltonian examples") {
  const auto m = toy_model();
  CHECK(eval_hamiltonian({0.0, 0.0, 1.3, 0.0}, m) == 0.0);
  CHECK_THAT(eval_hamiltonian({1.0, 0.0, kPi / 2.0, 0.0}, m), WithinAbs(0.0, 1e-15));
  CHECK_THAT(eval_hamiltonian({0.0, 1.0, 0.0, 2.0}, m), WithinAbs(2.5, 1e-15));
}

TEST_CASE("vector field examples") {
  const auto m = toy_model();
  const auto d = vector_field({1.0, 0.0, kPi / 2.0, 0.0}, m, 0.1);
  CHECK_THAT(d.x, WithinAbs(0.0, 1e-15));
  CHECK_THAT(d.y, WithinAbs(-1.0, 1e-15));
  CHECK_THAT(d.u, WithinAbs(0.1, 1e-15));
  const auto z = vector_field({0.0, 0.0, 2.0, 0.0}, m, 0.3);
  CHECK(z.x == 0.0);
  CHECK(z.y == 0.0);
  CHECK(z.u == 0.3);
  const auto k = vector_field({kappa(kPi / 3.0, m), 0.0, kPi / 3.0, 0.0}, m, 0.1);
  CHECK_THAT(k.y, WithinAbs(0.0, 1e-12));
}

TEST_CASE("reflection commutes with the field") {
  const auto m = perturbed_model();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const ExtendedState s{U(rng), U(rng), 4.0 * U(rng), U(rng)};
    const auto a = vector_field(reflect(s), m, 0.05);
    const auto b = reflect(vector_field(s, m, 0.05));
    CHECK_THAT(a.x - b.x, WithinAbs(0.0, 1e-13));
    CHECK_THAT(a.y - b.y, WithinAbs(0.0, 1e-13));
  }
}

TEST_CASE("kappa") {
  const auto m = toy_model();
  CHECK_THAT(kappa(kPi / 2.0, m), WithinAbs(std::sqrt(0.5), 1e-12));
  CHECK_THAT(kappa(kPi / 6.0, m), WithinAbs(0.5, 1e-12));
  CHECK_THAT(kappa(1e-6, m) / std::sqrt(0.5e-6), WithinAbs(1.0, 1e-5));
  CHECK_THROWS_AS(kappa(4.0, m), NoRoot);

  const auto p = perturbed_model();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.01, kPi - 0.01);
  for (int i = 0; i < 100; ++i) {
    const double u = U(rng);
    const double k2 = std::pow(kappa(u, p), 2);
    CHECK_THAT(hamiltonian_partials(k2, 0.0, u, 0.0, p).Ha, WithinAbs(0.0, 1e-12));
    CHECK(vartheta(u, p) > 0.0);
  }
}

TEST_CASE("frequencies") {
  const auto m = toy_model();
  CHECK_THAT(vartheta(kPi / 2.0, m), WithinAbs(1.0, 1e-12));
  const auto fr = make_frame(1e-3, 0.1);
  const double mu2 = fr.mu * fr.mu;
  const double F = outer_frequency(-kPi / 2.0 / mu2, fr, m);
  CHECK_THAT(F * F * mu2, WithinAbs(1.0, 1e-12));
  const double uh = 1e-4 / mu2;
  const double Om = inner_frequency(uh, fr, m);
  CHECK_THAT(Om * Om / uh, WithinAbs(2.0, 1e-3));
  CHECK_THROWS_AS(outer_frequency(1.0, fr, m), DomainError);
  CHECK(fr.mu * fr.mu * fr.delta == Catch::Approx(std::pow(1e-3, 2.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("singular distance") {
  const auto m = toy_model();
  CHECK(singular_distance({0.0, 0.0, 1.5 * kPi, 0.0}, m) == 0.0);
  CHECK_THAT(singular_distance({kappa(kPi / 2.0, m), 0.0, kPi / 2.0, 0.0}, m), WithinAbs(0.0, 1e-14));
  CHECK_THAT(singular_distance({0.8, 0.1, kPi / 2.0, 0.0}, m), WithinAbs(0.19289, 1e-5));
}

TEST_CASE("symmetries are involutions") {
  const ExtendedState s{1.0, 2.0, 0.7, 3.0};
  const auto r = symmetry_apply(Symmetry::reflection, s, kPi);
  CHECK(r.x == -1.0);
  CHECK(r.y == -2.0);
  const auto t = symmetry_apply(Symmetry::time_reversal, s, kPi);
  CHECK(t.y == -2.0);
  CHECK_THAT(t.u, WithinAbs(kPi - 0.7, 1e-15));
  const auto tt = time_reverse(t, kPi);
  CHECK_THAT(tt.u, WithinAbs(s.u, 1e-15));
  CHECK(reflect(r).x == s.x);
}

TEST_CASE("assumption checks") {
  CHECK(validate_assumptions(toy_model()).all_passed());
  CHECK(validate_assumptions(perturbed_model()).all_passed());

  auto flipped = toy_model();
  flipped.f = [](double u) { return ProfileJet{-std::sin(u), -std::cos(u)}; };
  const auto r1 = validate_assumptions(flipped);
  CHECK_FALSE(r1.checks[1].passed);

  auto shifted = toy_model();
  shifted.f = [](double u) { return ProfileJet{std::sin(u) + 0.1, std::cos(u)}; };
  CHECK_FALSE(validate_assumptions(shifted).checks[0].passed);
  CHECK_THROWS_AS(validate_assumptions(toy_model(), 8), DomainError);
}

TEST_CASE("finite difference taylor coefficients match the analytic ones") {
  const auto m = perturbed_model(0.2, 0.1, 0.3, 0.1);
  const double u = 0.4;
  const auto t = taylor_coefficients(u, m);
  CHECK_THAT(t.M10, WithinAbs(0.2, 1e-8));
  CHECK_THAT(t.M01, WithinAbs(0.1 * std::sin(u), 1e-8));
  CHECK_THAT(t.V0, WithinAbs(0.1 * std::sin(u) / u, 1e-8));
  CHECK_THAT(t.M00, WithinAbs(0.0, 1e-12));
}

TEST_CASE("tabulated model reproduces the builtin ones") {
  const std::size_t n = 512;
  ModelTables t;
  t.f = sample_periodic([](double u) { return std::sin(u); }, n);
  const auto tab = tabulated_model(t);
  const auto toy = toy_model();
  for (double u : {0.1, 1.0, 2.5, 4.0, 6.2, -1.0, 8.0}) {
    CHECK_THAT(tab.f(u).value, WithinAbs(toy.f(u).value, 1e-8));
    CHECK_THAT(tab.f(u).d1, WithinAbs(toy.f(u).d1, 1e-5));
  }
  CHECK(validate_assumptions(tab).all_passed());

  ModelTables p = t;
  p.m_a = sample_periodic([](double) { return 0.2; }, n);
  p.m_b = sample_periodic([](double u) { return 0.1 * std::sin(u); }, n);
  p.v_a = sample_periodic([](double) { return 0.3; }, n);
  p.v_0 = sample_periodic([](double u) { return 0.1 * std::sin(u); }, n);
  const auto ptab = tabulated_model(p);
  const auto pm = perturbed_model();
  for (double u : {0.3, 2.0, 5.0}) {
    CHECK_THAT(ptab.kinetic(0.5, 0.7, u).value, WithinAbs(pm.kinetic(0.5, 0.7, u).value, 1e-8));
    CHECK_THAT(ptab.kinetic(0.5, 0.7, u).u, WithinAbs(pm.kinetic(0.5, 0.7, u).u, 1e-5));
    CHECK_THAT(ptab.potential(0.5, u).value, WithinAbs(pm.potential(0.5, u).value, 1e-8));
  }
  CHECK_THAT(kappa(1.0, ptab), WithinAbs(kappa(1.0, pm), 1e-8));
  CHECK_THROWS_AS(tabulated_model(ModelTables{}), ConfigError);
}
