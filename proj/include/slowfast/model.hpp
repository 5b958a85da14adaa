#pragma once

#include <algorithm>
#include <memory>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "errors.hpp"

namespace slowfast {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// f and f'.
struct ProfileJet {
  double value = 0.0;
  double d1 = 0.0;
};

// M(a, b, u) with a = x^2, b = y^2, and the partials the field and its Jacobian need.
struct KineticJet {
  double value = 0.0;
  double a = 0.0;
  double b = 0.0;
  double u = 0.0;
  double aa = 0.0;
  double ab = 0.0;
  double bb = 0.0;
};

// V(a, u) with a = x^2.
struct PotentialJet {
  double value = 0.0;
  double a = 0.0;
  double u = 0.0;
  double aa = 0.0;
};

// Lower indices expand about x = y = 0, upper ones about the kappa branch:
//   u*M00(u) = M(0,0,u), M10 = d_a M(0,0,u), M01 = d_b M(0,0,u), u*V0(u) = V(0,u),
//   u*M^00(u) = M(kappa^2,0,u), M^10 = d_a M(kappa^2,0,u), M^01 = d_b M(kappa^2,0,u).
struct TaylorCoefficients {
  double M00 = 0.0;
  double M10 = 0.0;
  double M01 = 0.0;
  double V0 = 0.0;
  double M00_upper = 0.0;
  double M10_upper = 0.0;
  double M01_upper = 0.0;
};

struct ModelSpec {
  std::string name;
  double tau = kPi;
  std::function<ProfileJet(double)> f;
  std::function<KineticJet(double, double, double)> M;  // empty: M = 0
  std::function<PotentialJet(double, double)> V;         // empty: V = 0
  std::function<TaylorCoefficients(double)> taylor;      // empty: finite differences

  KineticJet kinetic(double a, double b, double u) const { return M ? M(a, b, u) : KineticJet{}; }
  PotentialJet potential(double a, double u) const { return V ? V(a, u) : PotentialJet{}; }
};

struct ExtendedState {
  double x = 0.0;
  double y = 0.0;
  double u = 0.0;
  double v = 0.0;
};

// H and its partials in (a, b) = (x^2, y^2) at fixed u, v.
struct HamiltonianPartials {
  double H = 0.0;
  double Ha = 0.0;
  double Hb = 0.0;
  double Hu = 0.0;
  double Haa = 0.0;
  double Hab = 0.0;
  double Hbb = 0.0;
};

inline double wrap_two_pi(double angle) {
  double r = std::fmod(angle, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r;
}

inline HamiltonianPartials hamiltonian_partials(double a, double b, double u, double v,
                                                const ModelSpec& m, const ProfileJet& f) {
  const KineticJet M = m.kinetic(a, b, u);
  const PotentialJet V = m.potential(a, u);
  HamiltonianPartials p;
  p.H = v + 0.5 * b * (1.0 + M.value) - 0.5 * f.value * a + 0.5 * a * a * (1.0 + V.value);
  p.Ha = 0.5 * b * M.a - 0.5 * f.value + a * (1.0 + V.value) + 0.5 * a * a * V.a;
  p.Hb = 0.5 * (1.0 + M.value) + 0.5 * b * M.b;
  p.Hu = 0.5 * b * M.u - 0.5 * f.d1 * a + 0.5 * a * a * V.u;
  p.Haa = 0.5 * b * M.aa + 1.0 + V.value + 2.0 * a * V.a + 0.5 * a * a * V.aa;
  p.Hab = 0.5 * M.a + 0.5 * b * M.ab;
  p.Hbb = M.b + 0.5 * b * M.bb;
  return p;
}

inline HamiltonianPartials hamiltonian_partials(double a, double b, double u, double v,
                                                const ModelSpec& m) {
  return hamiltonian_partials(a, b, u, v, m, m.f(u));
}

inline double eval_hamiltonian(const ExtendedState& s, const ModelSpec& m) {
  return hamiltonian_partials(s.x * s.x, s.y * s.y, s.u, s.v, m).H;
}

// Time derivative (xdot, ydot, udot, vdot).
inline ExtendedState vector_field(const ExtendedState& s, const ModelSpec& m, double eps) {
  const auto p = hamiltonian_partials(s.x * s.x, s.y * s.y, s.u, s.v, m);
  return {2.0 * s.y * p.Hb, -2.0 * s.x * p.Ha, eps, -eps * p.Hu};
}

// d(xdot, ydot)/d(x, y), row-major.
struct FastJacobian {
  double xx = 0.0, xy = 0.0, yx = 0.0, yy = 0.0;
};

inline FastJacobian fast_jacobian(double x, double y, double u, const ModelSpec& m) {
  const auto p = hamiltonian_partials(x * x, y * y, u, 0.0, m);
  FastJacobian j;
  j.xx = 4.0 * x * y * p.Hab;
  j.xy = 2.0 * p.Hb + 4.0 * y * y * p.Hbb;
  j.yx = -2.0 * p.Ha - 4.0 * x * x * p.Haa;
  j.yy = -4.0 * x * y * p.Hab;
  return j;
}

// Positive root x = kappa(u) of d_{x^2}H(x^2, 0, u) = 0 for 0 < u < tau.
inline double kappa(double u, const ModelSpec& m) {
  const double f = m.f(u).value;
  if (!(f > 0.0)) throw NoRoot("kappa: f(u) <= 0 at u = " + std::to_string(u));
  auto residual = [&](double a) { return hamiltonian_partials(a, 0.0, u, 0.0, m); };
  const double seed = 0.5 * f;
  constexpr double tol = 1e-12;

  double a = seed;
  for (int it = 0; it < 50; ++it) {
    const auto p = residual(a);
    if (std::abs(p.Ha) < tol && a > 0.0) return std::sqrt(a);
    if (p.Haa == 0.0) break;
    a -= p.Ha / p.Haa;
    if (!std::isfinite(a) || a <= 0.0) break;
  }
  double lo = 0.01 * seed, hi = 9.0 * seed;
  double flo = residual(lo).Ha, fhi = residual(hi).Ha;
  if (flo * fhi > 0.0) throw NoRoot("kappa: no bracket at u = " + std::to_string(u));
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = residual(mid).Ha;
    if (std::abs(fm) < tol) return std::sqrt(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  throw NoRoot("kappa: bisection did not reach tolerance at u = " + std::to_string(u));
}

inline double vartheta(double u, const ModelSpec& m) {
  const double k2 = std::pow(kappa(u, m), 2);
  const auto p = hamiltonian_partials(k2, 0.0, u, 0.0, m);
  return 2.0 * k2 * p.Haa / (1.0 + m.kinetic(k2, 0.0, u).value);
}

struct ScaleFrame {
  double eps = 0.0;
  double delta = 0.0;
  double mu = 0.0;
  double u_star_hat = 1.0;
  double deltacond = 0.0;       // eps^{2/3} delta^{-7/2} ln^3(1/delta)
  double inner_budget = 0.0;    // delta^{3/4} ln(1/eps)
  double outer_budget = 0.0;    // delta^{3/2} ln(1/eps)
  bool budget_warning = false;

  double u_star() const { return mu * mu * u_star_hat; }
};

inline ScaleFrame make_frame(double eps, double delta, double u_star_hat = 1.0,
                             double warn_threshold = 0.5) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("make_frame: eps must lie in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("make_frame: delta must lie in (0, 1)");
  ScaleFrame fr;
  fr.eps = eps;
  fr.delta = delta;
  fr.mu = std::cbrt(eps) / std::sqrt(delta);
  fr.u_star_hat = u_star_hat;
  const double ld = std::log(1.0 / delta);
  fr.deltacond = std::pow(eps, 2.0 / 3.0) * std::pow(delta, -3.5) * ld * ld * ld;
  fr.inner_budget = std::pow(delta, 0.75) * std::log(1.0 / eps);
  fr.outer_budget = std::pow(delta, 1.5) * std::log(1.0 / eps);
  fr.budget_warning = fr.deltacond > warn_threshold || fr.inner_budget > warn_threshold;
  return fr;
}

// F-hat on the pre-bifurcation side.
inline double outer_frequency(double u_hat, const ScaleFrame& fr, const ModelSpec& m) {
  const double u = fr.mu * fr.mu * u_hat;
  const double sq = -m.f(u).value * (1.0 + m.kinetic(0.0, 0.0, u).value) / (fr.mu * fr.mu);
  if (!(sq > 0.0)) throw DomainError("outer_frequency: F^2 <= 0");
  return std::sqrt(sq);
}

// Omega-hat on the kappa branch.
inline double inner_frequency(double u_hat, const ScaleFrame& fr, const ModelSpec& m) {
  const double u = fr.mu * fr.mu * u_hat;
  if (!(u > 0.0 && u < m.tau)) throw DomainError("inner_frequency: u outside (0, tau)");
  const double sq = 2.0 * vartheta(u, m) / (fr.mu * fr.mu);
  if (!(sq > 0.0)) throw DomainError("inner_frequency: Omega^2 <= 0");
  return std::sqrt(sq);
}

struct Frequencies {
  std::optional<double> F_hat;
  std::optional<double> Omega_hat;
  std::optional<double> vartheta;
};

inline Frequencies frequencies(double u_hat, const ScaleFrame& fr, const ModelSpec& m) {
  Frequencies out;
  const double u = fr.mu * fr.mu * u_hat;
  if (u > 0.0 && u < m.tau) {
    out.vartheta = vartheta(u, m);
    out.Omega_hat = inner_frequency(u_hat, fr, m);
  } else if (m.f(u).value < 0.0) {
    out.F_hat = outer_frequency(u_hat, fr, m);
  }
  if (!out.F_hat && !out.Omega_hat) throw DomainError("frequencies: no branch defined at u_hat");
  return out;
}

inline TaylorCoefficients taylor_coefficients(double u, const ModelSpec& m) {
  if (m.taylor) return m.taylor(u);
  constexpr double h = 1e-5;
  TaylorCoefficients t;
  auto Mv = [&](double a, double b, double uu) { return m.kinetic(a, b, uu).value; };
  auto Vv = [&](double a, double uu) { return m.potential(a, uu).value; };
  auto over_u = [&](auto g) {
    if (std::abs(u) > h) return g(u) / u;
    return (g(h) - g(-h)) / (2.0 * h);
  };
  t.M00 = over_u([&](double uu) { return Mv(0.0, 0.0, uu); });
  t.M10 = (Mv(h, 0.0, u) - Mv(-h, 0.0, u)) / (2.0 * h);
  t.M01 = (Mv(0.0, h, u) - Mv(0.0, -h, u)) / (2.0 * h);
  t.V0 = over_u([&](double uu) { return Vv(0.0, uu); });
  const double uu = wrap_two_pi(u);
  if (uu > 0.0 && uu < m.tau) {
    const double k2 = std::pow(kappa(uu, m), 2);
    t.M00_upper = Mv(k2, 0.0, uu) / uu;
    t.M10_upper = (Mv(k2 + h, 0.0, uu) - Mv(k2 - h, 0.0, uu)) / (2.0 * h);
    t.M01_upper = (Mv(k2, h, uu) - Mv(k2, -h, uu)) / (2.0 * h);
  } else {
    t.M00_upper = t.M10_upper = t.M01_upper = std::numeric_limits<double>::quiet_NaN();
  }
  return t;
}

// Distance to the singular closed orbit: x_s = kappa(u) on (0, tau), else 0.
inline double singular_distance(const ExtendedState& s, const ModelSpec& m) {
  const double u = wrap_two_pi(s.u);
  double xs = 0.0;
  if (u > 0.0 && u < m.tau && m.f(u).value > 0.0) xs = kappa(u, m);
  return std::abs(std::abs(s.x) - xs) + std::abs(s.y);
}

enum class Symmetry { reflection, time_reversal };

inline ExtendedState reflect(const ExtendedState& s) { return {-s.x, -s.y, s.u, s.v}; }

inline ExtendedState time_reverse(const ExtendedState& s, double tau) {
  return {s.x, -s.y, tau - s.u, s.v};
}

inline ExtendedState symmetry_apply(Symmetry which, const ExtendedState& s, double tau) {
  return which == Symmetry::reflection ? reflect(s) : time_reverse(s, tau);
}

struct AssumptionCheck {
  std::string name;
  bool passed = true;
  double worst_value = 0.0;
  double worst_u = 0.0;
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }
};

inline ValidationReport validate_assumptions(const ModelSpec& m, int grid_size = 64,
                                             double tol = 1e-8) {
  if (grid_size < 16) throw DomainError("validate_assumptions: grid_size must be >= 16");
  ValidationReport rep;
  const double tau = m.tau;

  AssumptionCheck a1{"A1"};
  {
    const double vals[] = {std::abs(m.f(0.0).value), std::abs(m.f(tau).value),
                           std::abs(m.f(0.0).d1 - 1.0), std::abs(m.kinetic(0.0, 0.0, 0.0).value),
                           std::abs(m.potential(0.0, 0.0).value)};
    const double where[] = {0.0, tau, 0.0, 0.0, 0.0};
    for (int i = 0; i < 5; ++i) {
      if (vals[i] > a1.worst_value) {
        a1.worst_value = vals[i];
        a1.worst_u = where[i];
      }
    }
    a1.passed = a1.worst_value < tol;
  }
  rep.checks.push_back(a1);

  // Worst value is the most sign-violating f on each arc.
  AssumptionCheck a2{"A2"};
  a2.worst_value = std::numeric_limits<double>::infinity();
  for (int i = 1; i < grid_size; ++i) {
    const double up = tau * i / grid_size;
    const double um = tau + (kTwoPi - tau) * i / grid_size;
    const double sp = m.f(up).value, sm = -m.f(um).value;
    if (sp < a2.worst_value) {
      a2.worst_value = sp;
      a2.worst_u = up;
    }
    if (sm < a2.worst_value) {
      a2.worst_value = sm;
      a2.worst_u = um;
    }
  }
  a2.passed = a2.worst_value > 0.0;
  rep.checks.push_back(a2);

  AssumptionCheck a3{"A3"};
  for (int i = 0; i <= grid_size; ++i) {
    const double u = kTwoPi * i / grid_size;
    double d = std::abs(m.f(u).value - m.f(tau - u).value);
    for (double a : {0.0, 0.5, 2.0}) {
      for (double b : {0.0, 0.5, 2.0}) {
        d = std::max(d, std::abs(m.kinetic(a, b, u).value - m.kinetic(a, b, tau - u).value));
      }
      d = std::max(d, std::abs(m.potential(a, u).value - m.potential(a, tau - u).value));
    }
    if (d > a3.worst_value) {
      a3.worst_value = d;
      a3.worst_u = u;
    }
  }
  a3.passed = a3.worst_value < tol;
  rep.checks.push_back(a3);

  // Working box x^2 + y^2 <= 4.
  AssumptionCheck a4{"A4"};
  a4.worst_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_size; ++i) {
    const double u = kTwoPi * i / grid_size;
    for (int j = 0; j <= 8; ++j) {
      for (int k = 0; j + k <= 8; ++k) {
        const double val = 1.0 + m.kinetic(0.5 * j, 0.5 * k, u).value;
        if (val < a4.worst_value) {
          a4.worst_value = val;
          a4.worst_u = u;
        }
      }
    }
  }
  a4.passed = a4.worst_value > 0.0;
  rep.checks.push_back(a4);

  AssumptionCheck a5{"A5"};
  a5.worst_value = std::numeric_limits<double>::infinity();
  for (int i = 1; i < grid_size; ++i) {
    const double u = tau * i / grid_size;
    double val = -1.0;
    try {
      const double k2 = std::pow(kappa(u, m), 2);
      val = hamiltonian_partials(k2, 0.0, u, 0.0, m).Haa;
    } catch (const NoRoot&) {
    }
    if (val < a5.worst_value) {
      a5.worst_value = val;
      a5.worst_u = u;
    }
  }
  a5.passed = a5.worst_value > 0.0;
  rep.checks.push_back(a5);
  return rep;
}

// f = sin u, M = V = 0, tau = pi.
inline ModelSpec toy_model() {
  ModelSpec m;
  m.name = "toy";
  m.tau = kPi;
  m.f = [](double u) { return ProfileJet{std::sin(u), std::cos(u)}; };
  return m;
}

// Toy profile with M = alpha a + beta b sin u and V = gamma a + zeta sin u.
inline ModelSpec perturbed_model(double alpha = 0.2, double beta = 0.1, double gamma = 0.3,
                                 double zeta = 0.1) {
  ModelSpec m = toy_model();
  m.name = "perturbed";
  m.M = [=](double a, double b, double u) {
    const double s = std::sin(u);
    KineticJet k;
    k.value = alpha * a + beta * b * s;
    k.a = alpha;
    k.b = beta * s;
    k.u = beta * b * std::cos(u);
    return k;
  };
  m.V = [=](double a, double u) {
    PotentialJet p;
    p.value = gamma * a + zeta * std::sin(u);
    p.a = gamma;
    p.u = zeta * std::cos(u);
    return p;
  };
  return m;
}

// Cubic spline through samples g_k = g(2 pi k / n), k = 0..n-1, extended periodically.
class PeriodicSpline {
 public:
  PeriodicSpline() = default;
  explicit PeriodicSpline(const std::vector<double>& samples) {
    const std::size_t n = samples.size();
    if (n < 8) throw ConfigError("PeriodicSpline: need at least 8 samples");
    h_ = kTwoPi / static_cast<double>(n);
    std::vector<double> padded;
    for (std::size_t k = n - kPad; k < n; ++k) padded.push_back(samples[k]);
    padded.insert(padded.end(), samples.begin(), samples.end());
    for (std::size_t k = 0; k <= kPad; ++k) padded.push_back(samples[k]);
    spline_ = std::make_shared<Spline>(padded.begin(), padded.end(), -h_ * kPad, h_);
  }

  bool empty() const { return !spline_; }
  double operator()(double u) const { return empty() ? 0.0 : (*spline_)(wrap_two_pi(u)); }
  double prime(double u) const { return empty() ? 0.0 : spline_->prime(wrap_two_pi(u)); }

 private:
  using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;
  static constexpr std::size_t kPad = 3;
  double h_ = 0.0;
  std::shared_ptr<const Spline> spline_;
};

// Coefficient tables on the uniform u grid of [0, 2 pi):
//   M = m_a(u) a + m_b(u) b + m_0(u), V = v_a(u) a + v_0(u). Empty tables mean zero.
struct ModelTables {
  double tau = kPi;
  std::vector<double> f;
  std::vector<double> m_a, m_b, m_0;
  std::vector<double> v_a, v_0;
};

inline ModelSpec tabulated_model(const ModelTables& t, std::string name = "tabulated") {
  auto spline = [](const std::vector<double>& v) {
    return v.empty() ? PeriodicSpline{} : PeriodicSpline(v);
  };
  if (t.f.empty()) throw ConfigError("tabulated_model: f table is required");
  if (!(t.tau > 0.0 && t.tau < kTwoPi)) throw ConfigError("tabulated_model: tau outside (0, 2 pi)");
  ModelSpec m;
  m.name = std::move(name);
  m.tau = t.tau;
  const auto f = spline(t.f);
  m.f = [f](double u) { return ProfileJet{f(u), f.prime(u)}; };
  const auto ma = spline(t.m_a), mb = spline(t.m_b), m0 = spline(t.m_0);
  if (!ma.empty() || !mb.empty() || !m0.empty()) {
    m.M = [=](double a, double b, double u) {
      KineticJet k;
      k.a = ma(u);
      k.b = mb(u);
      k.value = k.a * a + k.b * b + m0(u);
      k.u = ma.prime(u) * a + mb.prime(u) * b + m0.prime(u);
      return k;
    };
  }
  const auto va = spline(t.v_a), v0 = spline(t.v_0);
  if (!va.empty() || !v0.empty()) {
    m.V = [=](double a, double u) {
      PotentialJet p;
      p.a = va(u);
      p.value = p.a * a + v0(u);
      p.u = va.prime(u) * a + v0.prime(u);
      return p;
    };
  }
  return m;
}

// Samples a callable on the grid tabulated_model expects.
template <class G>
std::vector<double> sample_periodic(G&& g, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = g(kTwoPi * static_cast<double>(k) / n);
  return out;
}

}  // namespace slowfast
