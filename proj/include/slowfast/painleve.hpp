#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "asymptotic_maps.hpp"
#include "errors.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "predictor.hpp"

namespace slowfast {

// Truncated blowup system in u_hat: x' = d y, y' = d (u x - 2 delta^{3/2} x^3), d = delta^{-3/2}.
class TruncatedSystem {
 public:
  explicit TruncatedSystem(double delta)
      : d_(std::pow(delta, -1.5)), c_(2.0 * std::pow(delta, 1.5)) {}

  Vec2 rhs(double u, const Vec2& z) const {
    return {d_ * z[1], d_ * (u * z[0] - c_ * z[0] * z[0] * z[0])};
  }

  Mat2 jacobian(double u, const Vec2& z) const {
    Mat2 J;
    J << 0.0, d_, d_ * (u - 3.0 * c_ * z[0] * z[0]), 0.0;
    return J;
  }

 private:
  double d_;
  double c_;
};

struct TruncatedFlow {
  Vec2 end{0.0, 0.0};
  Mat2 jacobian = Mat2::Identity();
  double max_abs_x = 0.0;
  double max_growth_ratio = 0.0;  // max |x(u)| / (delta^{-3/4} u^{1/2}) over u >= delta * u_breve
  double abs_x_at_zero = 0.0;
  std::size_t steps = 0;
};

inline double truncated_step(double delta, double step_factor = 0.01) {
  return step_factor * std::pow(delta, 1.5);
}

// GL2 on the truncated system from u_from to u_to (either direction).
inline TruncatedFlow integrate_truncated(const Vec2& z0, double u_from, double u_to, double delta,
                                         bool variational = false, double step_factor = 0.01,
                                         double u_breve = 10.0) {
  if (!(delta > 0.0 && delta <= 0.2)) throw DomainError("integrate_truncated: delta outside (0, 0.2]");
  if (!(step_factor > 0.0 && step_factor <= 0.01))
    throw DomainError("integrate_truncated: step factor must be in (0, 0.01]");
  TruncatedSystem sys(delta);
  IntegratorConfig cfg;
  const double span = u_to - u_from;
  const double hmax = truncated_step(delta, step_factor);
  const auto n = static_cast<std::size_t>(std::ceil(std::abs(span) / hmax));
  const double h = n == 0 ? 0.0 : span / static_cast<double>(n);
  const double scale = std::pow(delta, -0.75);
  TruncatedFlow out;
  Vec2 z = z0;
  double u = u_from;
  bool crossed_zero = (u_from == 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto st = gl2_solve(sys, u, z, h, cfg);
    if (variational) out.jacobian = gl2_step_derivative(sys, u, st, h) * out.jacobian;
    z = st.z_next;
    const double un = u_from + h * static_cast<double>(k + 1);
    if (!crossed_zero && un >= 0.0) {
      out.abs_x_at_zero = std::abs(z[0]);
      crossed_zero = true;
    }
    u = un;
    out.max_abs_x = std::max(out.max_abs_x, std::abs(z[0]));
    if (u >= delta * u_breve)
      out.max_growth_ratio = std::max(out.max_growth_ratio, std::abs(z[0]) / (scale * std::sqrt(u)));
  }
  out.end = z;
  out.steps = n;
  return out;
}

// Action-angle data of the truncated system: F_hat = sqrt(-u), Omega_hat = sqrt(2u).
inline Vec2 truncated_from_outer(const OuterAA& aa, double u_hat) {
  if (!(u_hat < 0.0)) throw DomainError("truncated_from_outer: u_hat must be negative");
  const double F = std::sqrt(-u_hat);
  const double r = std::sqrt(2.0 * aa.z0_hat);
  return {r * std::cos(aa.w0) / std::sqrt(F), r * std::sin(aa.w0) * std::sqrt(F)};
}

inline OuterAA truncated_to_outer(const Vec2& z, double u_hat) {
  if (!(u_hat < 0.0)) throw DomainError("truncated_to_outer: u_hat must be negative");
  const double F = std::sqrt(-u_hat);
  const double x0 = std::sqrt(F) * z[0];
  const double y0 = z[1] / std::sqrt(F);
  OuterAA aa;
  aa.z0_hat = 0.5 * (x0 * x0 + y0 * y0);
  aa.w0 = wrap_two_pi(std::atan2(y0, x0));
  return aa;
}

inline double truncated_kappa(double u_hat, double delta) {
  return std::sqrt(0.5 * u_hat) * std::pow(delta, -0.75);
}

inline InnerAA truncated_to_inner(const Vec2& z, double u_hat, double delta, int sign) {
  if (!(u_hat > 0.0)) throw DomainError("truncated_to_inner: u_hat must be positive");
  const double sg = sign >= 0 ? 1.0 : -1.0;
  const double Om = std::sqrt(2.0 * u_hat);
  const double xi = std::sqrt(Om) * (sg * z[0] - truncated_kappa(u_hat, delta));
  const double s = sg * z[1] / std::sqrt(Om);
  InnerAA aa;
  aa.rho0_hat = 0.5 * (xi * xi + s * s);
  aa.phi0 = wrap_two_pi(std::atan2(s, xi));
  aa.eta = sign >= 0 ? 1 : -1;
  return aa;
}

inline Vec2 truncated_from_inner(const InnerAA& aa, double u_hat, double delta) {
  const double sg = aa.eta >= 0 ? 1.0 : -1.0;
  const double Om = std::sqrt(2.0 * u_hat);
  const double r = std::sqrt(2.0 * aa.rho0_hat);
  return {sg * (truncated_kappa(u_hat, delta) + r * std::cos(aa.phi0) / std::sqrt(Om)),
          sg * r * std::sin(aa.phi0) * std::sqrt(Om)};
}

// Original system over u_hat in [-u_star, u_star], reported in outer blowup coordinates.
struct FullBlowupResult {
  BlowupPoint end;
  double budget = 0.0;  // mu^2 delta^{-5/2} ln^3(1/delta)
  std::size_t steps = 0;
};

inline FullBlowupResult integrate_full_blowup(const Vec2& z0, const ScaleFrame& fr,
                                              const ModelSpec& m, double step_factor = 0.01) {
  const double us = fr.u_star_hat;
  const double mu2 = fr.mu * fr.mu;
  const auto start = unblow_outer({z0[0], z0[1], -us}, fr);
  IntegratorConfig cfg;
  cfg.h = step_factor * mu2 * std::pow(fr.delta, 1.5) / fr.eps;
  const auto r = flow_to_section(start, m, fr.eps, us * mu2, cfg);
  FullBlowupResult out;
  out.end = blowup_outer(r.state, fr);
  out.end.u_hat = us;
  const double ld = std::log(1.0 / fr.delta);
  out.budget = mu2 * std::pow(fr.delta, -2.5) * ld * ld * ld;
  out.steps = r.steps;
  return out;
}

struct CrossingExperiment {
  double delta = 0.0;
  double u_star_hat = 1.0;
  OuterAA initial;
  double lambda = 0.0;
  Vec2 start{0.0, 0.0};
  Vec2 end{0.0, 0.0};
  InnerAA measured;
  InnerAA predicted;
  int measured_branch = 0;
  bool branch_match = true;
  double action_error = 0.0;
  double phase_error = 0.0;
  double jacobian_norm = 0.0;
  double jacobian_det = 0.0;
  std::size_t steps = 0;
};

struct ConnectionReport {
  std::vector<CrossingExperiment> experiments;
  double action_slope = 0.0;
  double action_intercept = 0.0;
  int branch_mismatches = 0;
};

inline double phase_distance(double a, double b) {
  return std::abs(std::remainder(a - b, kTwoPi));
}

inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys,
                           double* intercept = nullptr) {
  if (xs.size() != ys.size() || xs.size() < 2) throw DegenerateFit("loglog_slope: need two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0 && ys[i] > 0.0)) throw DegenerateFit("loglog_slope: nonpositive value");
    const double lx = std::log(xs[i]), ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 1e-14)) throw DegenerateFit("loglog_slope: all abscissae equal");
  const double slope = (n * sxy - sx * sy) / den;
  if (intercept) *intercept = (sy - slope * sx) / n;
  return slope;
}

inline CrossingExperiment run_crossing(double z0_hat, double w0, double delta,
                                       double u_star_hat = 1.0, double step_factor = 0.01,
                                       bool variational = false) {
  CrossingExperiment e;
  e.delta = delta;
  e.u_star_hat = u_star_hat;
  e.initial = {z0_hat, wrap_two_pi(w0)};
  const auto fr = make_frame(1e-9, delta, u_star_hat, 1e300);
  e.lambda = crossing_lambda(e.initial, fr);
  e.predicted = crossing_from_lambda(z0_hat, e.lambda, fr, 1e-6);
  e.start = truncated_from_outer(e.initial, -u_star_hat);
  const auto flow =
      integrate_truncated(e.start, -u_star_hat, u_star_hat, delta, variational, step_factor);
  e.end = flow.end;
  e.steps = flow.steps;
  e.measured_branch = e.end[0] >= 0.0 ? 1 : -1;
  e.branch_match = e.measured_branch == e.predicted.eta;
  e.measured = truncated_to_inner(e.end, u_star_hat, delta, e.measured_branch);
  e.action_error = std::abs(e.measured.rho0_hat - e.predicted.rho0_hat);
  e.phase_error = phase_distance(e.measured.phi0, e.predicted.phi0);
  if (variational) {
    e.jacobian_norm = flow.jacobian.norm();
    e.jacobian_det = flow.jacobian.determinant();
  }
  return e;
}

inline ConnectionReport verify_connection(double z0_hat, double w0,
                                          const std::vector<double>& delta_list,
                                          double u_star_hat = 1.0, double step_factor = 0.01) {
  if (delta_list.size() < 2) throw DomainError("verify_connection: need at least two deltas");
  for (std::size_t i = 1; i < delta_list.size(); ++i)
    if (!(delta_list[i] < delta_list[i - 1]))
      throw DomainError("verify_connection: delta list must decrease");
  ConnectionReport rep;
  std::vector<double> ds, errs;
  for (double d : delta_list) {
    auto e = run_crossing(z0_hat, w0, d, u_star_hat, step_factor, true);
    if (!e.branch_match) ++rep.branch_mismatches;
    ds.push_back(d);
    errs.push_back(std::max(e.action_error, 1e-300));
    rep.experiments.push_back(e);
  }
  rep.action_slope = loglog_slope(ds, errs, &rep.action_intercept);
  return rep;
}

// Single-seed action errors oscillate with the crossing phase, so the order is read off
// the seed-averaged error.
struct EnsembleReport {
  std::vector<double> deltas;
  std::vector<double> mean_action_error;
  std::vector<double> mean_phase_error;
  std::vector<std::pair<double, double>> seeds;  // (z0_hat, w0)
  std::vector<ConnectionReport> runs;
  double action_slope = 0.0;
  int branch_mismatches = 0;
};

inline EnsembleReport verify_connection_ensemble(const std::vector<double>& delta_list,
                                                 int n_seeds = 16, std::uint64_t seed = 20240611,
                                                 double z_lo = 0.2, double z_hi = 1.5,
                                                 double u_star_hat = 1.0,
                                                 double step_factor = 0.01) {
  if (n_seeds < 1) throw DomainError("verify_connection_ensemble: need at least one seed");
  EnsembleReport rep;
  rep.deltas = delta_list;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n_seeds; ++i) {
    const double z = z_lo + (z_hi - z_lo) * uniform01(rng);
    const double w = kTwoPi * uniform01(rng);
    rep.seeds.push_back({z, w});
  }
  rep.runs.resize(rep.seeds.size());
  parallel_for(rep.seeds.size(), [&](std::size_t i) {
    rep.runs[i] = verify_connection(rep.seeds[i].first, rep.seeds[i].second, delta_list,
                                    u_star_hat, step_factor);
  });
  rep.mean_action_error.assign(delta_list.size(), 0.0);
  rep.mean_phase_error.assign(delta_list.size(), 0.0);
  for (const auto& r : rep.runs) {
    rep.branch_mismatches += r.branch_mismatches;
    for (std::size_t k = 0; k < delta_list.size(); ++k) {
      rep.mean_action_error[k] += r.experiments[k].action_error / n_seeds;
      rep.mean_phase_error[k] += r.experiments[k].phase_error / n_seeds;
    }
  }
  rep.action_slope = loglog_slope(rep.deltas, rep.mean_action_error);
  return rep;
}

struct JacobianGrowth {
  std::vector<double> deltas;
  std::vector<double> norms;        // |dPsi| by central differences in (x_hat, y_hat)
  std::vector<double> ratios;       // norms / ln^2(1/delta)
  std::vector<double> dets;
  std::vector<double> interior;     // |dPsi_0| at u_hat = 0
  std::vector<double> interior_ratios;  // interior / (delta^{-1/4} ln(1/delta))
  bool tail_non_increasing = true;
};

inline Mat2 fd_flow_jacobian(const Vec2& z, double u_from, double u_to, double delta,
                             double step_factor) {
  Mat2 J;
  for (int k = 0; k < 2; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(z[k]));
    Vec2 zp = z, zm = z;
    zp[k] += h;
    zm[k] -= h;
    const auto ep = integrate_truncated(zp, u_from, u_to, delta, false, step_factor).end;
    const auto em = integrate_truncated(zm, u_from, u_to, delta, false, step_factor).end;
    J.col(k) = (ep - em) / (2.0 * h);
  }
  return J;
}

inline JacobianGrowth jacobian_growth_check(double z0_hat, double w0,
                                            const std::vector<double>& delta_list,
                                            double u_star_hat = 1.0, double step_factor = 0.01) {
  JacobianGrowth g;
  for (double d : delta_list) {
    const Vec2 z = truncated_from_outer({z0_hat, w0}, -u_star_hat);
    const Mat2 J = fd_flow_jacobian(z, -u_star_hat, u_star_hat, d, step_factor);
    const Mat2 J0 = fd_flow_jacobian(z, -u_star_hat, 0.0, d, step_factor);
    const double ld = std::log(1.0 / d);
    g.deltas.push_back(d);
    g.norms.push_back(J.norm());
    g.ratios.push_back(J.norm() / (ld * ld));
    g.dets.push_back(J.determinant());
    g.interior.push_back(J0.norm());
    g.interior_ratios.push_back(J0.norm() / (std::pow(d, -0.25) * ld));
  }
  for (std::size_t i = 1; i < g.deltas.size(); ++i) {
    if (g.deltas[i - 1] > 0.05) continue;
    if (g.ratios[i] > g.ratios[i - 1] * (1.0 + 1e-9)) g.tail_non_increasing = false;
  }
  return g;
}

// Seed-averaged |dPsi| / ln^2(1/delta); single seeds swing with the crossing phase.
inline JacobianGrowth jacobian_growth_ensemble(const std::vector<std::pair<double, double>>& seeds,
                                               const std::vector<double>& delta_list,
                                               double u_star_hat = 1.0,
                                               double step_factor = 0.01) {
  if (seeds.empty()) throw DomainError("jacobian_growth_ensemble: no seeds");
  std::vector<JacobianGrowth> runs(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    runs[i] = jacobian_growth_check(seeds[i].first, seeds[i].second, delta_list, u_star_hat,
                                    step_factor);
  });
  JacobianGrowth g;
  g.deltas = delta_list;
  const std::size_t n = delta_list.size();
  const double w = 1.0 / static_cast<double>(seeds.size());
  g.norms.assign(n, 0.0);
  g.ratios.assign(n, 0.0);
  g.dets.assign(n, 0.0);
  g.interior.assign(n, 0.0);
  g.interior_ratios.assign(n, 0.0);
  for (const auto& r : runs) {
    for (std::size_t k = 0; k < n; ++k) {
      g.norms[k] += w * r.norms[k];
      g.ratios[k] += w * r.ratios[k];
      g.dets[k] += w * r.dets[k];
      g.interior[k] += w * r.interior[k];
      g.interior_ratios[k] += w * r.interior_ratios[k];
    }
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (g.deltas[i - 1] > 0.05) continue;
    if (g.ratios[i] > g.ratios[i - 1] * (1.0 + 1e-9)) g.tail_non_increasing = false;
  }
  return g;
}

}  // namespace slowfast
