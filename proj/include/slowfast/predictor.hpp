#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "asymptotic_maps.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "specfun.hpp"

namespace slowfast {

enum class SeedCase { i, ii };
enum class Side { left, right };
enum class Stability { stable, unstable, marginal };

inline std::string to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    default: return "marginal";
  }
}

inline Stability classify_trace(double trace, double margin) {
  const double a = std::abs(trace);
  if (a < 2.0 - margin) return Stability::stable;
  if (a > 2.0 + margin) return Stability::unstable;
  return Stability::marginal;
}

struct AnalyticSeed {
  SeedCase seed_case = SeedCase::i;
  double z0_hat = 0.0;
  double w0 = 0.0;
  double lambda_l = 0.0;
  double rho0_hat = 0.0;
  double residual = 0.0;
  double predicted_trace = 0.0;  // of P, or of P^2 for period_mult 2
  Stability predicted_stability = Stability::unstable;
  int period_mult = 1;
  std::string symmetry;
};

// Everything in the fixed-point equations that depends on eps only.
struct PredictorContext {
  double eps = 0.0;
  double L = 0.0;         // ln(1/eps)
  double L2 = 0.0;        // ln(e2/eps)
  double L4 = 0.0;        // ln(e4/eps)
  double outer_phase = 0.0;  // e3/eps mod 2 pi
  double inner_phase = 0.0;  // -sqrt2 e1/eps mod pi
  ModelConstants consts;
  double c_inv = 0.05;
  double stability_margin = 1e-3;
  PhaseConvention convention = PhaseConvention::corrected;
};

// L = ln(1/eps) is the primary input so that very small eps keep their phases.
inline PredictorContext make_context_from_log(double L, const ModelConstants& k,
                                              double c_inv = 0.05,
                                              PhaseConvention conv = PhaseConvention::corrected) {
  if (!(L > 0.0)) throw DomainError("make_context: ln(1/eps) must be positive");
  PredictorContext c;
  c.L = L;
  c.eps = std::exp(-L);
  c.consts = k;
  c.L2 = std::log(k.e2) + L;
  c.L4 = std::log(k.e4) + L;
  c.outer_phase = std::fmod(k.e3 * std::exp(L), kTwoPi);
  c.inner_phase = std::fmod(-std::numbers::sqrt2 * k.e1 * std::exp(L), kPi);
  c.c_inv = c_inv;
  c.convention = conv;
  return c;
}

inline PredictorContext make_context(double eps, const ModelConstants& k, double c_inv = 0.05,
                                     PhaseConvention conv = PhaseConvention::corrected) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("make_context: eps must lie in (0, 1)");
  return make_context_from_log(std::log(1.0 / eps), k, c_inv, conv);
}

// G without its eps^{-1} e3 term, which is carried by ctx.outer_phase.
inline double G_reduced(double z0_hat) {
  return 3.0 * z0_hat * kLn2 - 0.75 * kPi - arg_gamma_imag(z0_hat);
}

inline double pseudo_phase(double z0_hat, double w0, const PredictorContext& ctx, Side side) {
  const double sgn = side == Side::left ? -1.0 : 1.0;
  return sgn * w0 + ctx.L4 * z0_hat + G_reduced(z0_hat) + ctx.outer_phase;
}

// arg(1 + P e^{2 i lambda}) continuous in lambda: for P > 1 it winds with 2 lambda.
inline double arg_one_plus_p2(double P, double lambda) {
  if (P > 1.0) {
    return 2.0 * lambda + std::arg(1.0 + std::exp(std::complex<double>(0.0, -2.0 * lambda)) / P);
  }
  return std::arg(1.0 + P * std::exp(std::complex<double>(0.0, 2.0 * lambda)));
}

struct CaseIEval {
  double lambda = 0.0;
  double rho = 0.0;
  double F = 0.0;
};

// F_i^(2) as a lifted real; roots are F = 0 mod pi.
inline CaseIEval residual_case_i_eval(double z0_hat, const PredictorContext& ctx, double w0) {
  CaseIEval e;
  e.lambda = pseudo_phase(z0_hat, w0, ctx, Side::left);
  e.rho = rho0_closed(z0_hat, e.lambda);
  const double theta = Q_fun(e.rho) - arg_one_plus_p2(p_abs2(z0_hat), e.lambda);
  e.F = ctx.inner_phase + 2.0 * ctx.L2 * e.rho + theta_sign(ctx.convention) * theta;
  return e;
}

inline double residual_case_i(double z0_hat, const PredictorContext& ctx, double w0 = 0.0) {
  return residual_case_i_eval(z0_hat, ctx, w0).F;
}

struct CaseIIResidual {
  double F1 = 0.0;
  double F2 = 0.0;
};

inline double residual_case_ii_F1(double z0_hat, const PredictorContext& ctx) {
  return 2.0 * ctx.L4 * z0_hat + 2.0 * (G_reduced(z0_hat) + ctx.outer_phase);
}

inline double residual_case_ii_F2(double z0_hat, double lambda, const PredictorContext& ctx) {
  const double rho = rho0_closed(z0_hat, lambda);
  return ctx.inner_phase + 2.0 * ctx.L2 * rho + theta_sign(ctx.convention) * Q_fun(rho);
}

inline CaseIIResidual residual_case_ii(double z0_hat, double lambda, const PredictorContext& ctx) {
  return {residual_case_ii_F1(z0_hat, ctx), residual_case_ii_F2(z0_hat, lambda, ctx)};
}

// Distance of x to the nearest multiple of period.
inline double distance_mod(double x, double period) {
  const double r = std::fmod(std::abs(x), period);
  return std::min(r, period - r);
}

struct TraceTerms {
  double A = 0.0, B = 0.0, C = 0.0, D = 0.0, g = 0.0, q = 0.0;
};

// A is the true z0-derivative of rho0, (|p|^2 - 1) / (2 |p|^2).
inline TraceTerms trace_terms(double z0_hat, double lambda, double rho0_hat) {
  const double P = p_abs2(z0_hat);
  const double den = 1.0 + 2.0 * P * std::cos(2.0 * lambda) + P * P;
  if (den < 1e-14) throw SingularP("trace_jacobian: 1 + p^2 = 0");
  TraceTerms t;
  t.A = (P - 1.0) / (2.0 * P);
  t.B = -1.0 / (kTwoPi * std::tan(lambda));
  t.C = kTwoPi * (1.0 + P) * std::sin(2.0 * lambda) / den;
  t.D = 2.0 * P * (std::cos(2.0 * lambda) + P) / den;
  t.g = g_fun(z0_hat);
  t.q = q_fun(rho0_hat);
  return t;
}

// Trace of dP for lambda_r = lambda_l mod pi.
inline double trace_case_i(double z0_hat, double lambda, double rho0_hat,
                           const PredictorContext& ctx) {
  const auto t = trace_terms(z0_hat, lambda, rho0_hat);
  const double sg = theta_sign(ctx.convention);
  const double s = 2.0 * ctx.L2 + sg * t.q;
  const double K = ctx.L4 + t.g;
  return 2.0 - sg * 4.0 * t.B * (s * K * t.B + t.A * s - sg * (t.D * K + t.C));
}

// Trace of dP for lambda_r = -lambda_l mod pi.
inline double trace_case_ii(double z0_hat, double lambda, double rho0_hat,
                            const PredictorContext& ctx) {
  const auto t = trace_terms(z0_hat, lambda, rho0_hat);
  const double sg = theta_sign(ctx.convention);
  const double s = 2.0 * ctx.L2 + sg * t.q;
  return 2.0 + sg * 4.0 * s * (ctx.L4 + t.g) * t.B * t.B;
}

inline double trace_jacobian(const AnalyticSeed& s, const PredictorContext& ctx) {
  return s.seed_case == SeedCase::i ? trace_case_i(s.z0_hat, s.lambda_l, s.rho0_hat, ctx)
                                    : trace_case_ii(s.z0_hat, s.lambda_l, s.rho0_hat, ctx);
}

// 2A + D(z0, pi/2) directly from A and D.
inline double two_A_plus_D1(double z0_hat) {
  const double P = p_abs2(z0_hat);
  const double A = (P - 1.0) / (2.0 * P);
  const double D1 = 2.0 * P * (P - 1.0) / ((1.0 - P) * (1.0 - P));
  return 2.0 * A + D1;
}

// Closed form of 2A + D1 in E = e^{2 pi z0}.
inline double two_A_plus_D1_closed(double z0_hat) {
  const double E = std::exp(kTwoPi * z0_hat);
  return (3.0 * E * E - 8.0 * E + 6.0) / ((E - 1.0) * (E - 2.0));
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return !(hi > lo); }
  double width() const { return empty() ? 0.0 : hi - lo; }
};

// Coefficient k in tr = 2 + 2 s (s + k), s = lambda_hat / pi: 2A + D1 (paper) or 2A - D1.
inline double window_slope(double z0_hat, PhaseConvention conv = PhaseConvention::corrected) {
  const double P = p_abs2(z0_hat);
  const double D1 = 2.0 * P / (P - 1.0);
  return (P - 1.0) / P - theta_sign(conv) * D1;
}

// Windows in lambda_hat = (lambda - pi/2) ln(1/eps) where the leading-order trace
// tr = 2 - sg 2 s (s + k), s = lambda_hat / pi, lies in (-2, 2); ends pulled in by c_inv.
// The paper prints [-2 pi k + c, -c] for k > 0; the trace formula gives half that width.
inline std::vector<Interval> stability_windows(double z0_hat, double c_inv = 0.05,
                                               PhaseConvention conv = PhaseConvention::corrected) {
  if (std::abs(z0_hat - kSingularAction) < c_inv)
    throw Excluded("stability_window: z0 near ln2/(2 pi)");
  const double k = window_slope(z0_hat, conv);
  const double r0 = std::min(0.0, -k), r1 = std::max(0.0, -k);
  std::vector<Interval> out;
  auto push = [&](double lo, double hi) {
    const Interval iv{kPi * lo + c_inv, kPi * hi - c_inv};
    if (!iv.empty()) out.push_back(iv);
  };
  if (theta_sign(conv) < 0.0) {
    // -2 < s (s + k) < 0: between the roots, minus the part below -2.
    const double disc = k * k - 8.0;
    if (disc <= 0.0) {
      push(r0, r1);
    } else {
      const double q = std::sqrt(disc);
      push(r0, 0.5 * (-k - q));
      push(0.5 * (-k + q), r1);
    }
  } else {
    // 0 < s (s + k) < 2: outside the roots, inside s^2 + k s - 2 = 0.
    const double q = std::sqrt(k * k + 8.0);
    push(0.5 * (-k - q), r0);
    push(r1, 0.5 * (-k + q));
  }
  return out;
}

namespace detail {

// Runs until the bracket stops shrinking in double precision.
template <class F>
double bisect_level(F&& f, double a, double b, double level) {
  double fa = f(a) - level;
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    const double fm = f(m) - level;
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

// Golden-section search for an extremum of f on [a, b]; sign = +1 for a maximum.
template <class F>
double golden_extremum(F&& f, double a, double b, double sign) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = sign * f(c), fd = sign * f(d);
  for (int it = 0; it < 80 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = sign * f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = sign * f(d);
    }
  }
  return 0.5 * (a + b);
}

// All solutions of f = 0 mod period on [a, b], f continuous; extrema split monotone pieces.
template <class F>
std::vector<double> roots_mod(F&& f, double a, double b, double period, int samples) {
  std::vector<double> xs(samples + 1), fs(samples + 1);
  for (int i = 0; i <= samples; ++i) {
    xs[i] = a + (b - a) * i / samples;
    fs[i] = f(xs[i]);
  }
  std::vector<double> bx{xs[0]}, bf{fs[0]};
  for (int i = 1; i < samples; ++i) {
    const double d0 = fs[i] - fs[i - 1], d1 = fs[i + 1] - fs[i];
    if ((d0 > 0.0 && d1 < 0.0) || (d0 < 0.0 && d1 > 0.0)) {
      const double x = golden_extremum(f, xs[i - 1], xs[i + 1], d0 > 0.0 ? 1.0 : -1.0);
      if (x > bx.back()) {
        bx.push_back(x);
        bf.push_back(f(x));
      }
    }
  }
  bx.push_back(xs[samples]);
  bf.push_back(fs[samples]);
  std::vector<double> roots;
  for (std::size_t j = 0; j + 1 < bx.size(); ++j) {
    const double lo = std::min(bf[j], bf[j + 1]), hi = std::max(bf[j], bf[j + 1]);
    for (double m = std::ceil(lo / period); m * period <= hi; m += 1.0) {
      roots.push_back(bisect_level(f, bx[j], bx[j + 1], m * period));
    }
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double u, double v) { return std::abs(u - v) < 1e-12; }),
              roots.end());
  return roots;
}

}  // namespace detail

struct SolveOptions {
  double z_lo = 0.12;
  double z_hi = 2.0;
  std::vector<double> branches{0.0};  // case (i) w0 values
  int samples_per_strip = 256;
};

// z0 intervals on which lambda_l stays in one admissible strip (n pi + c, (n+1) pi - c).
inline std::vector<Interval> admissible_strips(const PredictorContext& ctx, double w0, double z_lo,
                                               double z_hi) {
  auto lam = [&](double z) { return pseudo_phase(z, w0, ctx, Side::left); };
  std::vector<Interval> out;
  const double l0 = lam(z_lo), l1 = lam(z_hi);
  if (!(l1 > l0)) throw DomainError("admissible_strips: lambda_l not increasing on the window");
  const auto n0 = static_cast<long>(std::floor(l0 / kPi));
  const auto n1 = static_cast<long>(std::floor(l1 / kPi));
  for (long n = n0; n <= n1; ++n) {
    const double lo_l = n * kPi + ctx.c_inv, hi_l = (n + 1) * kPi - ctx.c_inv;
    const double a = lo_l <= l0 ? z_lo : detail::bisect_level(lam, z_lo, z_hi, lo_l);
    const double b = hi_l >= l1 ? z_hi : detail::bisect_level(lam, z_lo, z_hi, hi_l);
    // Cut out the band around the singular action.
    const double s_lo = kSingularAction - ctx.c_inv, s_hi = kSingularAction + ctx.c_inv;
    if (b <= s_lo || a >= s_hi) {
      if (b > a) out.push_back({a, b});
    } else {
      if (s_lo > a) out.push_back({a, s_lo});
      if (b > s_hi) out.push_back({s_hi, b});
    }
  }
  return out;
}

inline std::string case_i_symmetry(double w0) {
  const double r = std::fmod(wrap_two_pi(w0), kPi);
  return std::abs(r) < 1e-9 || std::abs(r - kPi) < 1e-9 ? "T_tau" : "R_and_T_tau";
}

inline std::vector<AnalyticSeed> solve_case_i(const PredictorContext& ctx,
                                              const SolveOptions& opt) {
  std::vector<AnalyticSeed> out;
  for (double w0 : opt.branches) {
    const bool doubled = case_i_symmetry(w0) == "R_and_T_tau";
    for (const auto& strip : admissible_strips(ctx, w0, opt.z_lo, opt.z_hi)) {
      auto F = [&](double z) { return residual_case_i(z, ctx, w0); };
      for (double z : detail::roots_mod(F, strip.lo, strip.hi, kPi, opt.samples_per_strip)) {
        const auto e = residual_case_i_eval(z, ctx, w0);
        AnalyticSeed s;
        s.seed_case = SeedCase::i;
        s.z0_hat = z;
        s.w0 = wrap_two_pi(w0);
        s.lambda_l = e.lambda;
        s.rho0_hat = e.rho;
        s.residual = distance_mod(e.F, kPi);
        const double tr = trace_case_i(z, e.lambda, e.rho, ctx);
        s.period_mult = doubled ? 2 : 1;
        s.predicted_trace = doubled ? tr * tr - 2.0 : tr;
        s.predicted_stability = classify_trace(tr, ctx.stability_margin);
        s.symmetry = doubled ? "R_and_T_tau" : "T_tau";
        out.push_back(s);
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.w0 != b.w0 ? a.w0 < b.w0 : a.z0_hat < b.z0_hat;
  });
  return out;
}

inline std::vector<AnalyticSeed> solve_case_ii(const PredictorContext& ctx,
                                               const SolveOptions& opt) {
  std::vector<AnalyticSeed> out;
  std::vector<Interval> pieces;
  const double s_lo = kSingularAction - ctx.c_inv, s_hi = kSingularAction + ctx.c_inv;
  if (opt.z_hi <= s_lo || opt.z_lo >= s_hi) {
    pieces.push_back({opt.z_lo, opt.z_hi});
  } else {
    if (s_lo > opt.z_lo) pieces.push_back({opt.z_lo, s_lo});
    if (opt.z_hi > s_hi) pieces.push_back({s_hi, opt.z_hi});
  }
  auto F1 = [&](double z) { return residual_case_ii_F1(z, ctx); };
  for (const auto& piece : pieces) {
    const int samples = std::max(64, static_cast<int>(8.0 * ctx.L * piece.width()));
    for (double z : detail::roots_mod(F1, piece.lo, piece.hi, kPi, samples)) {
      const double f1 = F1(z);
      const bool doubled = static_cast<long>(std::llround(f1 / kPi)) % 2 != 0;
      // F2 depends on lambda through |sin lambda| only; solve on (c, pi/2] and mirror.
      auto F2 = [&](double lam) { return residual_case_ii_F2(z, lam, ctx); };
      const double a = ctx.c_inv, b = 0.5 * kPi;
      std::vector<double> lams;
      for (double lam : detail::roots_mod(F2, a, b, kPi, 128)) {
        lams.push_back(lam);
        if (lam < b - 1e-12) lams.push_back(kPi - lam);
      }
      for (double lam : lams) {
        AnalyticSeed s;
        s.seed_case = SeedCase::ii;
        s.z0_hat = z;
        s.lambda_l = lam;
        s.w0 = wrap_two_pi(ctx.L4 * z + G_reduced(z) + ctx.outer_phase - lam);
        s.rho0_hat = rho0_closed(z, lam);
        s.residual = std::max(distance_mod(f1, kPi), distance_mod(F2(lam), kPi));
        const double tr = trace_case_ii(z, lam, s.rho0_hat, ctx);
        s.period_mult = doubled ? 2 : 1;
        s.predicted_trace = doubled ? tr * tr - 2.0 : tr;
        s.predicted_stability = classify_trace(tr, ctx.stability_margin);
        s.symmetry = doubled ? "R_only" : "none";
        out.push_back(s);
      }
    }
  }
  return out;
}

inline std::vector<AnalyticSeed> solve_fixed_points(SeedCase c, const PredictorContext& ctx,
                                                    const SolveOptions& opt = {}) {
  if (!(opt.z_lo >= 0.05 && opt.z_hi <= 100.0 && opt.z_hi > opt.z_lo))
    throw DomainError("solve_fixed_points: z0 window must lie in [0.05, 100]");
  return c == SeedCase::i ? solve_case_i(ctx, opt) : solve_case_ii(ctx, opt);
}

inline int count_stable(const std::vector<AnalyticSeed>& seeds) {
  return static_cast<int>(std::count_if(seeds.begin(), seeds.end(), [](const auto& s) {
    return s.predicted_stability == Stability::stable;
  }));
}

// Uniform double in [0, 1) from the top 53 bits; independent of the standard library.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct SweepOptions {
  int n_values = 1000;
  double inv_log_lo = 0.05;  // range of 1/ln(1/eps)
  double inv_log_hi = 0.4;
  double z_lo = 0.12;
  double z_hi = 2.0;
  std::vector<double> branches{0.0};
  std::uint64_t seed = 20240611;
  double c_inv = 0.05;
  PhaseConvention convention = PhaseConvention::corrected;
};

struct SweepSample {
  double inv_log = 0.0;
  int n_seeds = 0;
  int n_stable = 0;
};

struct SweepResult {
  std::vector<SweepSample> samples;
  std::map<int, int> histogram;
  double zero_fraction() const {
    const auto it = histogram.find(0);
    return samples.empty() || it == histogram.end()
               ? 0.0
               : static_cast<double>(it->second) / static_cast<double>(samples.size());
  }
};

inline SweepResult stable_census_sweep(const ModelConstants& k, const SweepOptions& opt) {
  if (opt.n_values < 100) throw DomainError("stable_census_sweep: n_values must be >= 100");
  std::mt19937_64 rng(opt.seed);
  SolveOptions so;
  so.z_lo = opt.z_lo;
  so.z_hi = opt.z_hi;
  so.branches = opt.branches;
  SweepResult res;
  for (int i = 0; i < opt.n_values; ++i) {
    const double inv = opt.inv_log_lo + (opt.inv_log_hi - opt.inv_log_lo) * uniform01(rng);
    const auto ctx = make_context_from_log(1.0 / inv, k, opt.c_inv, opt.convention);
    const auto seeds = solve_case_i(ctx, so);
    SweepSample s{inv, static_cast<int>(seeds.size()), count_stable(seeds)};
    res.samples.push_back(s);
    ++res.histogram[s.n_stable];
  }
  return res;
}

// One stability interval: z0 range where lambda_hat sits in its window, and its F-image.
struct CoverInterval {
  long strip = 0;
  int window = 0;
  double z_a = 0.0;
  double z_b = 0.0;
  double f_a = 0.0;  // F_i^(2) at z_a, lifted
  double f_b = 0.0;
  bool hits_zero = false;
};

inline std::vector<CoverInterval> stability_intervals(const PredictorContext& ctx, double w0,
                                                      double z_lo, double z_hi) {
  auto lam = [&](double z) { return pseudo_phase(z, w0, ctx, Side::left); };
  auto windows = [&](double z) {
    try {
      return stability_windows(z, ctx.c_inv, ctx.convention);
    } catch (const Excluded&) {
      return std::vector<Interval>{};
    }
  };
  std::vector<CoverInterval> out;
  const double l0 = lam(z_lo), l1 = lam(z_hi);
  const auto n0 = static_cast<long>(std::floor(l0 / kPi - 0.5)) - 1;
  const auto n1 = static_cast<long>(std::floor(l1 / kPi - 0.5)) + 1;
  const std::size_t n_windows = windows(0.5 * (z_lo + z_hi)).size();
  for (long n = n0; n <= n1; ++n) {
    const double centre = (n + 0.5) * kPi;
    for (std::size_t j = 0; j < n_windows; ++j) {
      auto edge = [&, j](bool low) {
        return [&, j, low](double z) {
          const auto ws = windows(z);
          const double w = j < ws.size() ? (low ? ws[j].lo : ws[j].hi) : 0.0;
          return lam(z) - centre - w / ctx.L;
        };
      };
      const auto ga = edge(true), gb = edge(false);
      if (!(ga(z_lo) <= 0.0 && ga(z_hi) >= 0.0) || !(gb(z_lo) <= 0.0 && gb(z_hi) >= 0.0)) continue;
      CoverInterval ci;
      ci.strip = n;
      ci.window = static_cast<int>(j);
      ci.z_a = detail::bisect_level(ga, z_lo, z_hi, 0.0);
      ci.z_b = detail::bisect_level(gb, z_lo, z_hi, 0.0);
      if (!(ci.z_b > ci.z_a)) continue;
      if (std::abs(ci.z_a - kSingularAction) < ctx.c_inv ||
          std::abs(ci.z_b - kSingularAction) < ctx.c_inv)
        continue;
      ci.f_a = residual_case_i(ci.z_a, ctx, w0);
      ci.f_b = residual_case_i(ci.z_b, ctx, w0);
      const double lo = std::min(ci.f_a, ci.f_b), hi = std::max(ci.f_a, ci.f_b);
      ci.hits_zero = std::floor(hi / kPi) > std::floor(lo / kPi) || distance_mod(lo, kPi) < 1e-14;
      out.push_back(ci);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.z_a < b.z_a; });
  return out;
}

enum class CoverMode { part2, part3, part4 };

struct CoverReport {
  CoverMode mode = CoverMode::part2;
  std::vector<CoverInterval> intervals;
  std::vector<double> gaps;        // f_{n+1} - f_n mod pi
  std::vector<double> gap_theory;  // pi k mod pi at z_a, k = window_slope
  double upper_estimate = 0.0;     // ln^{(1+d)/(2+d)}(1/eps), d = 1.5
  double circle_coverage = 0.0;    // fraction of R/pi Z covered by the images
  // part3
  std::vector<double> eps_grid;
  std::vector<int> stable_counts;
  int count_changes = 0;
  double drift_rate = 0.0;  // (k e3 - e1) eps^{-2} at the first interval
  // part4
  std::vector<double> separations;
  std::vector<double> widths;
  bool consecutive_overlap = false;
};

inline double coverage_fraction(const std::vector<CoverInterval>& ivs) {
  std::vector<std::pair<double, double>> segs;
  for (const auto& c : ivs) {
    double lo = std::min(c.f_a, c.f_b), hi = std::max(c.f_a, c.f_b);
    if (hi - lo >= kPi) return 1.0;
    lo = std::fmod(lo, kPi);
    if (lo < 0.0) lo += kPi;
    hi = lo + (std::max(c.f_a, c.f_b) - std::min(c.f_a, c.f_b));
    if (hi <= kPi) {
      segs.push_back({lo, hi});
    } else {
      segs.push_back({lo, kPi});
      segs.push_back({0.0, hi - kPi});
    }
  }
  std::sort(segs.begin(), segs.end());
  double covered = 0.0, cur_lo = 0.0, cur_hi = -1.0;
  for (const auto& s : segs) {
    if (s.first > cur_hi) {
      if (cur_hi > cur_lo) covered += cur_hi - cur_lo;
      cur_lo = s.first;
      cur_hi = s.second;
    } else {
      cur_hi = std::max(cur_hi, s.second);
    }
  }
  if (cur_hi > cur_lo) covered += cur_hi - cur_lo;
  return covered / kPi;
}

inline double wrap_pi(double x) {
  double r = std::fmod(x, kPi);
  if (r < 0.0) r += kPi;
  return r;
}

struct CoverOptions {
  double z_start = 0.12;
  double z_end = 2.0;
  int n_steps = 400;       // eps samples for part3
  double c1 = 5.0;         // part3 half-width in units of eps^2
  double Z0_hat = 0.5;     // part4 substitution constant
  double w0 = 0.0;
  double c_inv = 0.05;
  PhaseConvention convention = PhaseConvention::corrected;
};

inline CoverReport interval_cover_analysis(double eps, const ModelConstants& k, CoverMode mode,
                                           const CoverOptions& opt = {}) {
  CoverReport rep;
  rep.mode = mode;
  const auto ctx = make_context(eps, k, opt.c_inv, opt.convention);
  auto fill_gaps = [&](CoverReport& r) {
    for (std::size_t n = 0; n + 1 < r.intervals.size(); ++n) {
      r.gaps.push_back(wrap_pi(r.intervals[n + 1].f_a - r.intervals[n].f_a));
      r.gap_theory.push_back(wrap_pi(kPi * window_slope(r.intervals[n].z_a, opt.convention)));
    }
  };
  if (mode == CoverMode::part2) {
    rep.intervals = stability_intervals(ctx, opt.w0, opt.z_start, opt.z_end);
    fill_gaps(rep);
    rep.upper_estimate = std::pow(ctx.L, 2.5 / 3.5);
    rep.circle_coverage = coverage_fraction(rep.intervals);
  } else if (mode == CoverMode::part3) {
    rep.intervals = stability_intervals(ctx, opt.w0, opt.z_start, opt.z_end);
    if (!rep.intervals.empty()) {
      rep.drift_rate =
          (window_slope(rep.intervals.front().z_a, opt.convention) * k.e3 - k.e1) / (eps * eps);
    }
    SolveOptions so;
    so.z_lo = opt.z_start;
    so.z_hi = opt.z_end;
    so.branches = {opt.w0};
    const double half = opt.c1 * eps * eps;
    int prev = -1;
    for (int i = 0; i <= opt.n_steps; ++i) {
      const double e = eps - half + 2.0 * half * i / opt.n_steps;
      const int c =
          count_stable(solve_case_i(make_context(e, k, opt.c_inv, opt.convention), so));
      rep.eps_grid.push_back(e);
      rep.stable_counts.push_back(c);
      if (prev >= 0 && c != prev) ++rep.count_changes;
      prev = c;
    }
  } else {
    // z0 = ln(L / Z0_hat) / (2 pi) and upward, one strip per interval.
    const double z_large = std::log(ctx.L / opt.Z0_hat) / kTwoPi;
    const double z_from = std::max(opt.z_start, z_large);
    rep.intervals = stability_intervals(ctx, opt.w0, z_from, z_from + opt.z_end);
    fill_gaps(rep);
    // Consecutive means the same window in the next strip.
    bool overlap = false;
    for (std::size_t n = 0; n < rep.intervals.size(); ++n) {
      const auto& a = rep.intervals[n];
      const auto next = std::find_if(rep.intervals.begin(), rep.intervals.end(), [&](const auto& b) {
        return b.strip == a.strip + 1 && b.window == a.window;
      });
      if (next == rep.intervals.end()) continue;
      const double width = std::abs(a.f_b - a.f_a);
      const double sep = distance_mod(next->f_a - a.f_a, kPi);
      rep.widths.push_back(width);
      rep.separations.push_back(sep);
      overlap = rep.separations.size() == 1 ? sep < width : overlap && sep < width;
    }
    rep.consecutive_overlap = overlap;
    rep.circle_coverage = coverage_fraction(rep.intervals);
  }
  return rep;
}

struct SectionPoint {
  double x = 0.0;
  double y = 0.0;
  double u = 0.0;
};

// Outer action-angle data at the section u = -pi + tau/2 in original coordinates.
inline SectionPoint seed_to_initial_condition(double z0_hat, double w0, double eps,
                                              const ModelSpec& m) {
  const double u = -kPi + 0.5 * m.tau;
  const double nf = -m.f(u).value;
  if (!(nf > 0.0)) throw DomainError("seed_to_initial_condition: f >= 0 at the section");
  const double w = 1.0 + m.kinetic(0.0, 0.0, u).value;
  const double r = std::sqrt(eps) * std::sqrt(2.0 * z0_hat);
  return {r * std::pow(nf, -0.25) * std::pow(w, 0.25) * std::cos(w0),
          r * std::pow(nf, 0.25) * std::pow(w, -0.25) * std::sin(w0), u};
}

inline SectionPoint seed_to_initial_condition(const AnalyticSeed& s, double eps,
                                              const ModelSpec& m) {
  return seed_to_initial_condition(s.z0_hat, s.w0, eps, m);
}

}  // namespace slowfast
