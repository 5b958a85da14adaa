#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "predictor.hpp"

namespace slowfast {

enum class OrbitSymmetry { T_tau, R_and_T_tau, R_only, none };

inline std::string to_string(OrbitSymmetry s) {
  switch (s) {
    case OrbitSymmetry::T_tau: return "T_tau";
    case OrbitSymmetry::R_and_T_tau: return "R_and_T_tau";
    case OrbitSymmetry::R_only: return "R_only";
    default: return "none";
  }
}

struct OrbitRecord {
  double x0 = 0.0;
  double y0 = 0.0;
  int period_mult = 1;
  double residual = 0.0;
  double trace = 0.0;
  Stability stability = Stability::unstable;
  OrbitSymmetry symmetry = OrbitSymmetry::T_tau;
  double max_singular_distance = 0.0;
  int iterations = 0;
};

struct CensusRow {
  double eps = 0.0;
  int pos_count = 0;
  int spos_count = 0;
  int spos_small_count = 0;
  int upos_small_count = 0;
  int marginal_count = 0;
  int period2_count = 0;
  // scan metadata
  double x_lo = 0.0;
  double x_hi = 0.5;
  int base_grid = 0;
  int log_grid = 0;
  double log_grid_floor = 0.0;
  double refine_threshold = 0.0;
  double refine_min_width = 0.0;
  long evaluations = 0;
  int failures = 0;
  IntegratorConfig integrator;
};

// Section u = -pi + tau/2 of the return map.
inline double section_phase(const ModelSpec& m) { return -kPi + 0.5 * m.tau; }

// Stroboscopic map over one slow period.
inline Vec2 return_map(double x, double y, const ModelSpec& m, double eps,
                       const IntegratorConfig& cfg) {
  const double u0 = section_phase(m);
  const auto r = flow_to_section({x, y, u0, 0.0}, m, eps, u0 + kTwoPi, cfg);
  return {r.state.x, r.state.y};
}

inline std::pair<Vec2, Mat2> return_map_with_jacobian(double x, double y, const ModelSpec& m,
                                                      double eps, const IntegratorConfig& cfg,
                                                      int periods = 1) {
  const double u0 = section_phase(m);
  const auto r = flow_to_section({x, y, u0, 0.0}, m, eps, u0 + kTwoPi * periods, cfg, true);
  return {Vec2(r.state.x, r.state.y), r.jacobian};
}

// Shooting defect at u = tau/2 from (x0, 0): y for period 1, x for period 2.
struct ShotDefect {
  double value = 0.0;
  double derivative = 0.0;  // d value / d x0
  Vec2 end{0.0, 0.0};
};

inline ShotDefect shooting_defect(double x0, const ModelSpec& m, double eps,
                                  const IntegratorConfig& cfg, int period_mult,
                                  bool with_derivative = false) {
  const double u0 = section_phase(m);
  const auto r = flow_to_section({x0, 0.0, u0, 0.0}, m, eps, 0.5 * m.tau, cfg, with_derivative);
  ShotDefect d;
  d.end = {r.state.x, r.state.y};
  const int k = period_mult == 1 ? 1 : 0;
  d.value = d.end[k];
  d.derivative = r.jacobian(k, 0);
  return d;
}

struct OrbitCheck {
  double trace = 0.0;
  double closure = 0.0;
  double det = 0.0;
  double max_singular_distance = 0.0;
};

// Full-period integration from (x0, y0): monodromy trace, closure defect, distance to x_s.
inline OrbitCheck check_orbit(double x0, double y0, const ModelSpec& m, double eps,
                              const IntegratorConfig& cfg, int period_mult) {
  const double u0 = section_phase(m);
  OrbitCheck c;
  auto obs = [&](double, const ExtendedState& s) {
    c.max_singular_distance = std::max(c.max_singular_distance, singular_distance(s, m));
  };
  const auto r =
      flow_to_section({x0, y0, u0, 0.0}, m, eps, u0 + kTwoPi * period_mult, cfg, true, obs);
  c.trace = r.jacobian.trace();
  c.det = r.jacobian.determinant();
  c.closure = std::hypot(r.state.x - x0, r.state.y - y0);
  return c;
}

struct ShootingOptions {
  int max_iterations = 30;
  double tolerance = 1e-9;
  double stability_margin = 1e-3;
};

// Newton on the shooting defect from (x0, 0); nullopt when it does not converge.
inline std::optional<OrbitRecord> find_symmetric_orbit(double x0, const ModelSpec& m, double eps,
                                                       const IntegratorConfig& cfg,
                                                       int period_mult = 1,
                                                       const ShootingOptions& opt = {}) {
  if (period_mult != 1 && period_mult != 2)
    throw DomainError("find_symmetric_orbit: period_mult must be 1 or 2");
  double x = x0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    ShotDefect d;
    try {
      d = shooting_defect(x, m, eps, cfg, period_mult, true);
    } catch (const NewtonDiverged&) {
      return std::nullopt;
    }
    if (std::abs(d.value) < opt.tolerance) {
      const auto c = check_orbit(x, 0.0, m, eps, cfg, period_mult);
      OrbitRecord r;
      r.x0 = x;
      r.period_mult = period_mult;
      r.residual = std::abs(d.value);
      r.trace = c.trace;
      r.stability = classify_trace(c.trace, opt.stability_margin);
      r.symmetry = period_mult == 1 ? OrbitSymmetry::T_tau : OrbitSymmetry::R_and_T_tau;
      r.max_singular_distance = c.max_singular_distance;
      r.iterations = it;
      return r;
    }
    if (d.derivative == 0.0 || !std::isfinite(d.derivative)) return std::nullopt;
    const double step = d.value / d.derivative;
    x -= std::clamp(step, -0.05, 0.05);
    if (!(x > 0.0)) return std::nullopt;
  }
  return std::nullopt;
}

struct CensusControls {
  int base_grid = 4000;           // uniform points on the window; raised to 10/eps if larger
  int log_grid = 200;             // log-spaced points below the first uniform point
  double log_grid_floor = 1e-12;
  double refine_threshold = 0.05; // split while |P(a) - P(b)| exceeds this
  double refine_min_width = 1e-5; // smallest bracket the refinement will split
  double dedup = 1e-7;
  double stability_margin = 1e-3;
  int period_mult = 1;
};

namespace detail {

struct Sample {
  double x = 0.0;
  Vec2 end{0.0, 0.0};
  bool ok = true;
};

inline Sample shoot_sample(double x, const ModelSpec& m, double eps, const IntegratorConfig& cfg,
                           int period_mult) {
  try {
    return {x, shooting_defect(x, m, eps, cfg, period_mult).end, true};
  } catch (const NewtonDiverged&) {
    return {x, Vec2::Zero(), false};
  }
}

// Bisect a sign change of the defect down to the shooting tolerance, then polish by Newton.
inline std::optional<OrbitRecord> isolate_root(double a, double b, const ModelSpec& m, double eps,
                                               const IntegratorConfig& cfg,
                                               const CensusControls& c) {
  auto defect = [&](double x) { return shooting_defect(x, m, eps, cfg, c.period_mult).value; };
  double fa = defect(a);
  for (int it = 0; it < 60 && b - a > 1e-10; ++it) {
    const double mid = 0.5 * (a + b);
    const double fm = defect(mid);
    if ((fm < 0.0) == (fa < 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  ShootingOptions so;
  so.stability_margin = c.stability_margin;
  so.max_iterations = 8;
  auto rec = find_symmetric_orbit(0.5 * (a + b), m, eps, cfg, c.period_mult, so);
  if (rec && (rec->x0 < a - 1e-9 || rec->x0 > b + 1e-9)) rec.reset();
  if (!rec) {
    // Newton left the bracket: keep the bisection midpoint and its own defect.
    const double x = 0.5 * (a + b);
    const double r = std::abs(defect(x));
    const auto chk = check_orbit(x, 0.0, m, eps, cfg, c.period_mult);
    OrbitRecord o;
    o.x0 = x;
    o.period_mult = c.period_mult;
    o.residual = r;
    o.trace = chk.trace;
    o.stability = classify_trace(chk.trace, c.stability_margin);
    o.symmetry = c.period_mult == 1 ? OrbitSymmetry::T_tau : OrbitSymmetry::R_and_T_tau;
    o.max_singular_distance = chk.max_singular_distance;
    rec = o;
  }
  return rec;
}

}  // namespace detail

struct CensusResult {
  CensusRow row;
  std::vector<OrbitRecord> orbits;
};

inline CensusResult scan_census(double eps, double x_lo, double x_hi, const ModelSpec& m,
                                const IntegratorConfig& cfg, const CensusControls& c = {}) {
  if (!(x_lo >= 0.0 && x_hi > x_lo && x_hi < 1.0))
    throw DomainError("scan_census: window must lie in (0, 1)");
  CensusResult res;
  auto& row = res.row;
  row.eps = eps;
  row.x_lo = x_lo;
  row.x_hi = x_hi;
  row.base_grid = std::max(c.base_grid, static_cast<int>(std::ceil(10.0 / eps)));
  row.log_grid = c.log_grid;
  row.log_grid_floor = c.log_grid_floor;
  row.refine_threshold = c.refine_threshold;
  row.refine_min_width = c.refine_min_width;
  row.integrator = cfg;

  // Grid: log-spaced up to the first uniform point, then uniform.
  std::vector<double> xs;
  const double dx = (x_hi - x_lo) / row.base_grid;
  const double first = x_lo + dx;
  const double floor_x = std::max(c.log_grid_floor, x_lo);
  if (c.log_grid > 0 && floor_x < first) {
    for (int k = 0; k < c.log_grid; ++k)
      xs.push_back(floor_x * std::pow(first / floor_x, static_cast<double>(k) / c.log_grid));
  }
  for (int k = 1; k <= row.base_grid; ++k) xs.push_back(x_lo + dx * k);

  std::vector<detail::Sample> base(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) {
    base[i] = detail::shoot_sample(xs[i], m, eps, cfg, c.period_mult);
  });
  row.evaluations = static_cast<long>(xs.size());

  const int k = c.period_mult == 1 ? 1 : 0;
  // Refine each base interval independently, collecting bracketing pairs in x order.
  std::vector<std::vector<std::pair<double, double>>> brackets(xs.size());
  std::vector<long> evals(xs.size(), 0);
  std::vector<int> fails(xs.size(), 0);
  parallel_for(xs.size() > 0 ? xs.size() - 1 : 0, [&](std::size_t i) {
    std::function<void(const detail::Sample&, const detail::Sample&)> rec =
        [&](const detail::Sample& a, const detail::Sample& b) {
          if (!a.ok || !b.ok) {
            ++fails[i];
            return;
          }
          if ((a.end - b.end).norm() > c.refine_threshold && b.x - a.x > c.refine_min_width) {
            const auto mid = detail::shoot_sample(0.5 * (a.x + b.x), m, eps, cfg, c.period_mult);
            ++evals[i];
            rec(a, mid);
            rec(mid, b);
            return;
          }
          if ((a.end[k] > 0.0) != (b.end[k] > 0.0)) brackets[i].push_back({a.x, b.x});
        };
    rec(base[i], base[i + 1]);
  });
  for (std::size_t i = 0; i < xs.size(); ++i) {
    row.evaluations += evals[i];
    row.failures += fails[i];
  }
  std::vector<std::pair<double, double>> all;
  for (auto& b : brackets) all.insert(all.end(), b.begin(), b.end());

  std::vector<std::optional<OrbitRecord>> found(all.size());
  parallel_for(all.size(), [&](std::size_t i) {
    try {
      found[i] = detail::isolate_root(all[i].first, all[i].second, m, eps, cfg, c);
    } catch (const NewtonDiverged&) {
      found[i].reset();
    }
  });
  for (auto& f : found) {
    if (!f) {
      ++row.failures;
      continue;
    }
    if (!res.orbits.empty() && std::abs(f->x0 - res.orbits.back().x0) < c.dedup) {
      if (f->residual < res.orbits.back().residual) res.orbits.back() = *f;
      continue;
    }
    res.orbits.push_back(*f);
  }

  const double small = 2.0 * std::sqrt(eps);
  for (const auto& o : res.orbits) {
    if (o.period_mult != 1) {
      ++row.period2_count;
      continue;
    }
    ++row.pos_count;
    const bool in_small = o.x0 <= small;
    if (o.stability == Stability::stable) {
      ++row.spos_count;
      if (in_small) ++row.spos_small_count;
    } else if (o.stability == Stability::unstable) {
      if (in_small) ++row.upos_small_count;
    } else {
      ++row.marginal_count;
    }
  }
  return res;
}

struct LogSquareFit {
  double a = 0.0;
  double b = 0.0;
  std::vector<double> relative_errors;
};

// Least squares for count ~ a ln^2(1/eps) + b.
inline LogSquareFit fit_log_square(const std::vector<double>& eps,
                                   const std::vector<double>& counts) {
  if (eps.size() != counts.size()) throw DomainError("fit_log_square: size mismatch");
  if (eps.size() < 3) throw DegenerateFit("fit_log_square: need at least 3 rows");
  Eigen::MatrixXd X(eps.size(), 2);
  Eigen::VectorXd y(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double l = std::log(1.0 / eps[i]);
    X(i, 0) = l * l;
    X(i, 1) = 1.0;
    y(i) = counts[i];
  }
  const double spread = X.col(0).maxCoeff() - X.col(0).minCoeff();
  if (!(spread > 1e-12)) throw DegenerateFit("fit_log_square: all eps equal");
  const Eigen::Vector2d beta = X.colPivHouseholderQr().solve(y);
  LogSquareFit f;
  f.a = beta(0);
  f.b = beta(1);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double pred = f.a * X(i, 0) + f.b;
    f.relative_errors.push_back(counts[i] == 0.0 ? std::abs(pred)
                                                 : std::abs(pred - counts[i]) / counts[i]);
  }
  return f;
}

inline LogSquareFit fit_log_square(const std::vector<CensusRow>& rows) {
  std::vector<double> e, c;
  for (const auto& r : rows) {
    e.push_back(r.eps);
    c.push_back(r.upos_small_count);
  }
  return fit_log_square(e, c);
}

// Two-dimensional Newton on P^period(z) - z from an analytic seed.
struct ContinuationResult {
  bool converged = false;
  int iterations = 0;
  double x = 0.0;
  double y = 0.0;
  double residual = 0.0;
  double trace = 0.0;
  Stability stability = Stability::unstable;
};

inline ContinuationResult continue_seed(double x, double y, const ModelSpec& m, double eps,
                                        const IntegratorConfig& cfg, int period_mult = 1,
                                        int max_iterations = 20, double tol = 1e-9,
                                        double max_step = 0.05) {
  ContinuationResult out;
  Vec2 z(x, y);
  for (int it = 1; it <= max_iterations; ++it) {
    std::pair<Vec2, Mat2> pj;
    try {
      pj = return_map_with_jacobian(z[0], z[1], m, eps, cfg, period_mult);
    } catch (const NewtonDiverged&) {
      break;
    }
    const Vec2 F = pj.first - z;
    out.iterations = it;
    out.residual = F.norm();
    out.trace = pj.second.trace();
    if (out.residual < tol) {
      out.converged = true;
      break;
    }
    const Mat2 J = pj.second - Mat2::Identity();
    Vec2 dz = J.fullPivLu().solve(-F);
    if (!dz.allFinite()) break;
    if (dz.norm() > max_step) dz *= max_step / dz.norm();
    z += dz;
  }
  out.x = z[0];
  out.y = z[1];
  out.stability = classify_trace(out.trace, 1e-3);
  return out;
}

struct ContinuationOptions {
  int n_seeds = 20;
  double min_abs_cot = 0.3;
  double z_lo = 0.3;
  double z_hi = 2.0;
  std::vector<double> branches{0.0, kPi};
  int max_iterations = 20;
  double tolerance = 1e-9;
  double max_step = 0.05;
  double c_inv = 0.05;
  PhaseConvention convention = PhaseConvention::corrected;
};

struct ContinuationRun {
  AnalyticSeed seed;
  SectionPoint start;
  ContinuationResult result;
};

struct ContinuationStudy {
  int available = 0;  // case (i) seeds passing the filters
  std::vector<ContinuationRun> runs;
  int converged = 0;
  int converged_unstable = 0;
  double success_fraction() const {
    return runs.empty() ? 0.0 : static_cast<double>(converged_unstable) / runs.size();
  }
};

// Case (i) seeds with |cot lambda_l| above the cut, n_seeds of them taken evenly from the
// list ordered by (w0, z0), each refined by Newton on the numerical return map.
inline ContinuationStudy continuation_study(double eps, const ModelSpec& m,
                                            const ModelConstants& k, const IntegratorConfig& cfg,
                                            const ContinuationOptions& opt = {}) {
  const auto ctx = make_context(eps, k, opt.c_inv, opt.convention);
  SolveOptions so;
  so.z_lo = opt.z_lo;
  so.z_hi = opt.z_hi;
  so.branches = opt.branches;
  std::vector<AnalyticSeed> pool;
  for (const auto& s : solve_case_i(ctx, so)) {
    if (std::abs(1.0 / std::tan(s.lambda_l)) >= opt.min_abs_cot) pool.push_back(s);
  }
  ContinuationStudy st;
  st.available = static_cast<int>(pool.size());
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(opt.n_seeds), pool.size());
  st.runs.resize(n);
  parallel_for(n, [&](std::size_t i) {
    auto& r = st.runs[i];
    r.seed = pool[i * pool.size() / n];
    r.start = seed_to_initial_condition(r.seed, eps, m);
    r.result = continue_seed(r.start.x, r.start.y, m, eps, cfg, r.seed.period_mult,
                             opt.max_iterations, opt.tolerance, opt.max_step);
  });
  for (const auto& r : st.runs) {
    if (!r.result.converged) continue;
    ++st.converged;
    if (std::abs(r.result.trace) > 2.0) ++st.converged_unstable;
  }
  return st;
}

}  // namespace slowfast
