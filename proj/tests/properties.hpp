#pragma once

// Property measurements shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "slowfast/asymptotic_maps.hpp"
#include "slowfast/integrator.hpp"
#include "slowfast/orbits.hpp"
#include "slowfast/painleve.hpp"
#include "slowfast/predictor.hpp"
#include "slowfast/specfun.hpp"

namespace props {

using namespace slowfast;

// Self-convergence of the endpoint against a run at h / 8.
inline double gl2_order_slope() {
  const auto m = toy_model();
  const double eps = 0.08, T = 10.0;
  const ExtendedState s0{0.3, 0.0, -kPi / 2.0, 0.0};
  IntegratorConfig cfg;
  cfg.h = 0.1 / 16.0;
  const auto ref = flow_for_time(s0, m, eps, T, cfg).state;
  std::vector<double> hs, errs;
  for (double h : {0.1, 0.05, 0.025}) {
    cfg.h = h;
    const auto s = flow_for_time(s0, m, eps, T, cfg).state;
    hs.push_back(h);
    errs.push_back(std::hypot(s.x - ref.x, s.y - ref.y));
  }
  return loglog_slope(hs, errs);
}

inline double energy_drift_one_period(double eps = 0.08, double h = 0.005) {
  const auto m = toy_model();
  IntegratorConfig cfg;
  cfg.h = h;
  const ExtendedState s0{0.3, 0.0, -kPi / 2.0, 0.0};
  const double H0 = eval_hamiltonian(s0, m);
  double drift = 0.0;
  flow_for_time(s0, m, eps, kTwoPi / eps, cfg, false, [&](double, const ExtendedState& s) {
    drift = std::max(drift, std::abs(eval_hamiltonian(s, m) - H0));
  });
  return drift;
}

inline double monodromy_det_error(double eps = 0.08) {
  const auto m = toy_model();
  double worst = 0.0;
  for (double x : {0.05, 0.3, 0.6}) {
    const Mat2 J = monodromy({x, 0.1, -kPi / 2.0, 0.0}, m, eps, kTwoPi / eps, {});
    worst = std::max(worst, std::abs(J.determinant() - 1.0));
  }
  return worst;
}

// max over random states of |P(R z) - R P(z)| and of the time-reversal defect.
inline double equivariance_error(int samples = 8) {
  const auto m = toy_model();
  const double eps = 0.08;
  IntegratorConfig cfg;
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = 0.6 * uniform01(rng) - 0.3, y = 0.6 * uniform01(rng) - 0.3;
    const double u = kTwoPi * uniform01(rng);
    const auto a = flow_for_time({x, y, u, 0.0}, m, eps, 1.0, cfg).state;
    const auto b = flow_for_time(reflect({x, y, u, 0.0}), m, eps, 1.0, cfg).state;
    worst = std::max(worst, std::hypot(b.x + a.x, b.y + a.y));
    // T_tau maps the endpoint back onto the T_tau image of the start.
    const auto t = time_reverse(a, m.tau);
    const auto back = flow_for_time(t, m, eps, 1.0, cfg).state;
    const auto want = time_reverse({x, y, u, 0.0}, m.tau);
    worst = std::max(worst, std::hypot(back.x - want.x, back.y - want.y));
  }
  return worst;
}

inline double rho_closed_forms_error(int samples = 1000) {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  int taken = 0;
  while (taken < samples) {
    const double z = 0.05 + 3.0 * uniform01(rng);
    const double lam = kTwoPi * uniform01(rng);
    if (!in_admissible_set(z, lam, 0.05)) continue;
    ++taken;
    worst = std::max(worst, std::abs(rho0_from_p(z, lam) - rho0_closed(z, lam)));
  }
  return worst;
}

inline double two_A_plus_D1_error() {
  double worst = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double z = 0.2 + 2.8 * i / 200.0;
    if (std::abs(z - kSingularAction) < 0.05) continue;
    const double P = p_abs2(z);
    // A and D(z0, lambda) at lambda = pi/2, cos 2 lambda = -1.
    const double A = (P - 1.0) / (2.0 * P);
    const double D1 = 2.0 * P * (P - 1.0) / (1.0 - 2.0 * P + P * P);
    const double direct = 2.0 * A + D1;
    worst = std::max(worst, std::abs(direct - two_A_plus_D1_closed(z)));
  }
  return worst;
}

// |Gamma(iy)|^2 = pi / (y sinh(pi y)), compared in logs.
inline double reflection_identity_error() {
  double worst = 0.0;
  for (double y : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0}) {
    const double lhs = 2.0 * gamma_on_imaginary_axis(y).log_abs_gamma;
    const double rhs = std::log(kPi / y) - (kPi * y + std::log1p(-std::exp(-2.0 * kPi * y)) -
                                             std::log(2.0));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

// ln of the largest multiplier of x = y = 0 over one slow period.
inline double trivial_log_multiplier(double eps) {
  const Mat2 J = monodromy({0.0, 0.0, -kPi / 2.0, 0.0}, toy_model(), eps, kTwoPi / eps, {});
  const Eigen::EigenSolver<Mat2> es(J);
  return std::log(std::max(std::abs(es.eigenvalues()[0]), std::abs(es.eigenvalues()[1])));
}

}  // namespace props
