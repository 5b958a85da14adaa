#include <catch_amalgamated.hpp>

#include "slowfast/painleve.hpp"

using namespace slowfast;
using Catch::Matchers::WithinAbs;

TEST_CASE("truncated system keeps the origin") {
  const auto f = integrate_truncated({0.0, 0.0}, -1.0, 1.0, 0.1);
  CHECK(f.end.norm() == 0.0);
  CHECK_THROWS_AS(integrate_truncated({0.0, 0.0}, -1.0, 1.0, 0.3), DomainError);
  CHECK_THROWS_AS(integrate_truncated({0.0, 0.0}, -1.0, 1.0, 0.1, false, 0.02), DomainError);
}

TEST_CASE("truncated flow is symplectic and reversible") {
  const Vec2 z0 = truncated_from_outer({0.7, 1.3}, -1.0);
  const auto f = integrate_truncated(z0, -1.0, 1.0, 0.1, true);
  CHECK_THAT(f.jacobian.determinant(), WithinAbs(1.0, 1e-9));
  const auto back = integrate_truncated(f.end, 1.0, -1.0, 0.1);
  CHECK_THAT((back.end - z0).norm(), WithinAbs(0.0, 1e-9));
}

TEST_CASE("action angle helpers roundtrip") {
  const auto aa = truncated_to_outer(truncated_from_outer({0.4, 2.2}, -1.0), -1.0);
  CHECK_THAT(aa.z0_hat, WithinAbs(0.4, 1e-14));
  CHECK_THAT(aa.w0, WithinAbs(2.2, 1e-14));
  const InnerAA in{0.3, 4.0, -1};
  const auto r = truncated_to_inner(truncated_from_inner(in, 1.0, 0.05), 1.0, 0.05, -1);
  CHECK_THAT(r.rho0_hat, WithinAbs(0.3, 1e-12));
  CHECK_THAT(r.phi0, WithinAbs(4.0, 1e-12));
  CHECK_THROWS_AS(truncated_from_outer({0.4, 0.0}, 1.0), DomainError);
}

TEST_CASE("crossing picks the predicted branch") {
  for (double w0 : {0.4, 2.5}) {
    const auto a = run_crossing(0.8, w0, 0.05);
    const auto b = run_crossing(0.8, w0 + kPi, 0.05);
    CHECK(a.branch_match);
    CHECK(b.branch_match);
    CHECK(a.measured_branch == -b.measured_branch);
    CHECK_THAT(a.measured.rho0_hat, WithinAbs(b.measured.rho0_hat, 1e-9));
    CHECK(a.action_error < 0.05);
  }
}

TEST_CASE("crossing error shrinks with delta") {
  const auto rep = verify_connection(0.9, 1.0, {0.1, 0.05, 0.02});
  CHECK(rep.branch_mismatches == 0);
  CHECK(rep.experiments.back().action_error < rep.experiments.front().action_error);
  for (const auto& e : rep.experiments) CHECK_THAT(e.jacobian_det, WithinAbs(1.0, 1e-8));
  CHECK_THROWS_AS(verify_connection(0.9, 1.0, {0.05, 0.1}), DomainError);
}

TEST_CASE("truncated solution stays near the sqrt(u) branch") {
  const Vec2 z0 = truncated_from_outer({0.6, 0.5}, -1.0);
  const auto f = integrate_truncated(z0, -1.0, 1.0, 0.05);
  CHECK(f.max_growth_ratio < 2.0);
  CHECK(f.max_growth_ratio > 0.3);
}

TEST_CASE("loglog slope") {
  CHECK_THAT(loglog_slope({1.0, 2.0, 4.0}, {3.0, 12.0, 48.0}), WithinAbs(2.0, 1e-12));
  CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), DegenerateFit);
  CHECK_THROWS_AS(loglog_slope({1.0, 1.0}, {1.0, 2.0}), DegenerateFit);
}
