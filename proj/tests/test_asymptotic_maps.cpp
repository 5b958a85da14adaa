#include <catch_amalgamated.hpp>

#include <random>

#include "properties.hpp"
#include "slowfast/asymptotic_maps.hpp"
#include "slowfast/painleve.hpp"

using namespace slowfast;
using Catch::Matchers::WithinAbs;

TEST_CASE("outer blowup") {
  const auto fr = make_frame(1e-3, 0.1);
  const ExtendedState s{std::cbrt(1e-3) * std::pow(0.1, 0.25), 0.0, -0.2, 0.0};
  const auto b = blowup_outer(s, fr);
  CHECK_THAT(b.x_hat, WithinAbs(1.0, 1e-12));
  CHECK_THAT(b.u_hat * fr.mu * fr.mu, WithinAbs(-0.2, 1e-15));
  const auto back = unblow_outer(b, fr);
  CHECK_THAT(back.x, WithinAbs(s.x, 1e-15));
}

TEST_CASE("inner blowup") {
  const auto m = toy_model();
  const auto fr = make_frame(1e-3, 0.1);
  const double u = 0.3;
  const ExtendedState on{kappa(u, m), 0.0, u, 0.0};
  const auto b = blowup_inner(on, fr, m, 1);
  CHECK_THAT(b.x_hat, WithinAbs(0.0, 1e-12));
  CHECK_THAT(b.y_hat, WithinAbs(0.0, 1e-12));
  const ExtendedState s{kappa(u, m) + 0.01, 0.02, u, 0.0};
  const auto p = blowup_inner(s, fr, m, 1);
  const auto q = blowup_inner(reflect(s), fr, m, -1);
  CHECK_THAT(p.x_hat - q.x_hat, WithinAbs(0.0, 1e-12));
  CHECK_THAT(p.y_hat - q.y_hat, WithinAbs(0.0, 1e-12));
  const auto r = unblow_inner(p, fr, m, 1);
  CHECK_THAT(r.x, WithinAbs(s.x, 1e-14));
  CHECK_THROWS_AS(blowup_inner({0.1, 0.0, -0.5, 0.0}, fr, m, 1), DomainError);
}

TEST_CASE("action angle frames") {
  const auto m = toy_model();
  const auto fr = make_frame(1e-3, 0.1);
  const double mu2 = fr.mu * fr.mu;
  const double uh = -0.5 / mu2;
  const auto zero = to_outer_action_angle({0.0, 0.0, uh}, fr, m);
  CHECK(zero.z0_hat == 0.0);
  CHECK(zero.w0 == 0.0);
  const OuterAA aa{0.7, 2.0};
  const auto b = from_outer_action_angle(aa, uh, fr, m);
  const auto back = to_outer_action_angle(b, fr, m);
  CHECK_THAT(back.z0_hat, WithinAbs(0.7, 1e-12));
  CHECK_THAT(back.w0, WithinAbs(2.0, 1e-12));
  const auto c = from_outer_action_angle(back, uh, fr, m);
  CHECK_THAT(c.x_hat, WithinAbs(b.x_hat, 1e-12));
  CHECK_THAT(c.y_hat, WithinAbs(b.y_hat, 1e-12));

  const InnerAA in{0.4, 1.0, 1};
  const double ui = 0.5 / mu2;
  const auto bi = from_inner_action_angle(in, ui, fr, m);
  const auto bb = to_inner_action_angle(bi, fr, m, 1);
  CHECK_THAT(bb.rho0_hat, WithinAbs(0.4, 1e-12));
  CHECK_THAT(bb.phi0, WithinAbs(1.0, 1e-12));
}

TEST_CASE("crossing map values and domain") {
  const auto fr = make_frame(1e-9, 0.01, 1.0, 1e300);
  CHECK_THROWS_AS(crossing_from_lambda(kSingularAction, kPi / 2.0, fr), OutsideDomain);
  CHECK_THROWS_AS(crossing_from_lambda(0.5, 0.01, fr), OutsideDomain);
  const auto r = crossing_from_lambda(0.5, kPi / 2.0, fr);
  CHECK_THAT(r.rho0_hat, WithinAbs(rho0_closed(0.5, kPi / 2.0), 1e-12));
  CHECK_THAT(r.rho0_hat, WithinAbs(0.1432, 1e-4));
  CHECK(props::rho_closed_forms_error() < 1e-12);
}

TEST_CASE("crossing map is R invariant up to the branch") {
  const auto fr = make_frame(1e-9, 0.01, 1.0, 1e300);
  for (double w0 : {0.3, 1.9, 4.0}) {
    try {
      const auto a = crossing_map({0.6, w0}, fr);
      const auto b = crossing_map({0.6, w0 + kPi}, fr);
      CHECK_THAT(a.rho0_hat - b.rho0_hat, WithinAbs(0.0, 1e-12));
      CHECK_THAT(std::remainder(a.phi0 - b.phi0, kTwoPi), WithinAbs(0.0, 1e-9));
      CHECK(a.eta == -b.eta);
    } catch (const OutsideDomain&) {
    }
  }
}

TEST_CASE("averaged maps keep the actions") {
  const auto k = compute_constants(toy_model());
  const auto fr = make_frame(1e-3, 0.1);
  CHECK(outer_map({0.77, 1.0}, fr, k).z0_hat == 0.77);
  CHECK(inner_map({0.33, 1.0, 1, 0.0}, fr, k).rho0_hat == 0.33);
}

TEST_CASE("toy constants") {
  const auto k = compute_constants(toy_model());
  // int_0^{pi/2} sqrt(sin u) du
  CHECK_THAT(k.e1, WithinAbs(1.19814023473559220744, 1e-10));
  CHECK_THAT(k.e3, WithinAbs(1.19814023473559220744, 1e-10));
  // 1/2 int csc = 1/2 ln tan(u/2): C2 -> ln 2 / 2, C4 -> ln 2
  CHECK_THAT(k.C2, WithinAbs(0.5 * std::log(2.0), 1e-8));
  CHECK_THAT(k.e2, WithinAbs(std::pow(2.0, 1.5), 1e-7));
  CHECK_THAT(k.e4_raw, WithinAbs(2.0, 1e-8));
}

TEST_CASE("delta schedule") {
  const double eps = 1e-6;
  const double d = delta_schedule(eps, 0.15);
  CHECK_THAT(std::pow(eps, 2.0 / 3.0) * std::pow(d, -3.5), WithinAbs(std::pow(eps, 0.1416667), 1e-3));
  CHECK_THAT(std::pow(eps, 2.0 / 3.0) * std::pow(d, -3.5), WithinAbs(0.141, 2e-3));
  CHECK(delta_schedule(eps, 0.5) == Catch::Approx(std::pow(eps, 0.95 * 4.0 / 21.0)));
  CHECK(make_frame(0.1, 0.9).budget_warning);
}

// Phase after the crossing, measured by integrating the truncated system.
TEST_CASE("crossing phase convention against direct integration") {
  std::mt19937_64 rng(20240611);
  double err_corrected = 0.0, err_paper = 0.0;
  int n = 0;
  const double delta = 0.01;
  const auto fr = make_frame(1e-9, delta, 1.0, 1e300);
  while (n < 8) {
    const double z = 0.2 + 1.3 * uniform01(rng), w = kTwoPi * uniform01(rng);
    const double lam = crossing_lambda({z, w}, fr);
    if (!in_admissible_set(z, lam, 0.1)) continue;
    const auto e = run_crossing(z, w, delta);
    const auto pc = crossing_from_lambda(z, lam, fr, 0.1, PhaseConvention::corrected);
    const auto pp = crossing_from_lambda(z, lam, fr, 0.1, PhaseConvention::paper);
    err_corrected = std::max(err_corrected, phase_distance(e.measured.phi0, pc.phi0));
    err_paper += phase_distance(e.measured.phi0, pp.phi0) / 8.0;
    ++n;
  }
  CHECK(err_corrected < 0.15);
  CHECK(err_paper > 0.5);
}
