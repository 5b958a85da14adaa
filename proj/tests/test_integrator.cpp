#include <catch_amalgamated.hpp>

#include "properties.hpp"
#include "slowfast/integrator.hpp"

using namespace slowfast;
using Catch::Matchers::WithinAbs;

namespace {

struct Harmonic {
  Vec2 rhs(double, const Vec2& z) const { return {z[1], -z[0]}; }
  Mat2 jacobian(double, const Vec2&) const {
    Mat2 J;
    J << 0.0, 1.0, -1.0, 0.0;
    return J;
  }
};

}  // namespace

TEST_CASE("harmonic oscillator keeps the quadratic invariant") {
  Harmonic sys;
  IntegratorConfig cfg;
  Vec2 z(1.0, 0.0);
  Mat2 J = Mat2::Identity();
  const int n = 628;
  const double h = kTwoPi / n;
  for (int k = 0; k < n; ++k) {
    const auto st = gl2_solve(sys, k * h, z, h, cfg);
    J = gl2_step_derivative(sys, k * h, st, h) * J;
    z = st.z_next;
    REQUIRE_THAT(z.squaredNorm(), WithinAbs(1.0, 1e-14));
  }
  // Phase error of GL2 over one turn is about 2 pi h^4 / 720.
  CHECK_THAT((J - Mat2::Identity()).norm(), WithinAbs(0.0, 1e-9));
  CHECK_THAT(z[0], WithinAbs(1.0, 1e-9));
}

TEST_CASE("zero step returns the input") {
  IntegratorConfig cfg;
  cfg.h = 1e-14;
  const ExtendedState s{0.3, -0.2, 1.0, 0.5};
  const auto r = gl2_step(s, toy_model(), 0.08, cfg);
  CHECK_THAT(r.x, WithinAbs(s.x, 1e-13));
  CHECK_THAT(r.y, WithinAbs(s.y, 1e-13));
}

TEST_CASE("order four and energy conservation") {
  CHECK_THAT(props::gl2_order_slope(), WithinAbs(4.0, 0.2));
  CHECK(props::energy_drift_one_period() < 1e-8);
}

TEST_CASE("section to section covers one slow period exactly") {
  const auto m = toy_model();
  IntegratorConfig cfg;
  const double eps = 0.08, u0 = -kPi + 0.5 * m.tau;
  double t_end = 0.0;
  flow_to_section({0.2, 0.0, u0, 0.0}, m, eps, u0 + kTwoPi, cfg, false,
                  [&](double t, const ExtendedState&) { t_end = t; });
  CHECK_THAT(t_end, WithinAbs(kTwoPi / eps, 1e-9));
}

TEST_CASE("endpoint self-convergence at h and h / 2") {
  const auto m = toy_model();
  IntegratorConfig cfg;
  const ExtendedState s0{0.3, 0.0, -kPi / 2.0, 0.0};
  cfg.h = 0.01;
  const auto a = flow_for_time(s0, m, 0.08, 10.0, cfg).state;
  cfg.h = 0.005;
  const auto b = flow_for_time(s0, m, 0.08, 10.0, cfg).state;
  CHECK(std::hypot(a.x - b.x, a.y - b.y) < 1e-10);
}

TEST_CASE("monodromy") {
  CHECK(props::monodromy_det_error() < 1e-6);
  const auto m = toy_model();
  const ExtendedState s{0.2, 0.05, -kPi / 2.0, 0.0};
  IntegratorConfig cfg;
  const Mat2 a = monodromy(s, m, 0.08, 20.0, cfg, MonodromyMethod::variational);
  const Mat2 b = monodromy(s, m, 0.08, 20.0, cfg, MonodromyMethod::finite_difference);
  CHECK((a - b).norm() < 1e-6 * a.norm());
  const Mat2 t = monodromy({0.0, 0.0, -kPi / 2.0, 0.0}, m, 0.08, kTwoPi / 0.08, cfg);
  CHECK(std::abs(t.trace()) > 1e6);
  CHECK_THROWS_AS(monodromy(s, m, 0.08, -1.0, cfg), DomainError);
}

TEST_CASE("symmetries of the flow") { CHECK(props::equivariance_error() < 1e-8); }

TEST_CASE("trajectory sampling keeps the endpoint") {
  const auto tr = integrate_trajectory({0.1, 0.0, 0.0, 0.0}, toy_model(), 0.08, 1.0, {}, 7);
  CHECK(tr.t.front() == 0.0);
  CHECK_THAT(tr.t.back(), WithinAbs(1.0, 1e-12));
}

TEST_CASE("bad configuration is rejected") {
  IntegratorConfig cfg;
  cfg.newton_tol = 1e-16;
  CHECK_THROWS_AS(validate(cfg), DomainError);
  cfg = {};
  cfg.h = 0.0;
  CHECK_THROWS_AS(validate(cfg), DomainError);
}
