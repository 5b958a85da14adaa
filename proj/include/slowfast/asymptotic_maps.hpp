#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "specfun.hpp"

namespace slowfast {

inline constexpr double kLn2 = std::numbers::ln2;
// z0 where 1 + p^2 can vanish.
inline const double kSingularAction = std::numbers::ln2 / (2.0 * std::numbers::pi);

// Sign of theta in the inner phase after the crossing. The printed connection formula
// (paper) has phi0 = ... - theta; direct integration of the truncated system gives
// phi0 = ... + theta + pi, which is the default.
enum class PhaseConvention { corrected, paper };

inline std::string to_string(PhaseConvention c) {
  return c == PhaseConvention::corrected ? "corrected" : "paper";
}

inline double theta_sign(PhaseConvention c) {
  return c == PhaseConvention::corrected ? 1.0 : -1.0;
}

struct OuterAA {
  double z0_hat = 0.0;
  double w0 = 0.0;
};

struct InnerAA {
  double rho0_hat = 0.0;
  double phi0 = 0.0;
  int eta = 1;
  double error_estimate = 0.0;  // budgeted size of the dropped remainder
};

struct ModelConstants {
  double e1 = 0.0;
  double e2 = 0.0;
  double e3 = 0.0;
  double e4 = 0.0;      // convention of the outer map: raw^{3/2}
  double e4_raw = 0.0;  // exp(C4)
  double C2 = 0.0;
  double C4 = 0.0;
  double quad_tol = 0.0;
  std::vector<double> u_star_table;
  std::vector<double> C2_table;
  std::vector<double> C4_table;
};

struct BlowupPoint {
  double x_hat = 0.0;
  double y_hat = 0.0;
  double u_hat = 0.0;
};

inline BlowupPoint blowup_outer(const ExtendedState& s, const ScaleFrame& fr) {
  const double d34 = std::pow(fr.delta, 0.75);
  return {s.x / (fr.mu * d34), s.y / (fr.mu * fr.mu * d34), s.u / (fr.mu * fr.mu)};
}

inline ExtendedState unblow_outer(const BlowupPoint& b, const ScaleFrame& fr, double v = 0.0) {
  const double d34 = std::pow(fr.delta, 0.75);
  return {b.x_hat * fr.mu * d34, b.y_hat * fr.mu * fr.mu * d34, b.u_hat * fr.mu * fr.mu, v};
}

// Deviation from the sign*kappa branch: (x, y) = sign*(kappa, 0) + sign*(xi, sigma).
inline BlowupPoint blowup_inner(const ExtendedState& s, const ScaleFrame& fr, const ModelSpec& m,
                                int sign) {
  if (!(s.u > 0.0 && s.u < m.tau)) throw DomainError("blowup_inner: u outside (0, tau)");
  const double sg = sign >= 0 ? 1.0 : -1.0;
  const double d34 = std::pow(fr.delta, 0.75);
  const double xi = sg * s.x - kappa(s.u, m);
  const double sigma = sg * s.y;
  return {xi / (fr.mu * d34), sigma / (fr.mu * fr.mu * d34), s.u / (fr.mu * fr.mu)};
}

inline ExtendedState unblow_inner(const BlowupPoint& b, const ScaleFrame& fr, const ModelSpec& m,
                                  int sign, double v = 0.0) {
  const double u = b.u_hat * fr.mu * fr.mu;
  if (!(u > 0.0 && u < m.tau)) throw DomainError("unblow_inner: u outside (0, tau)");
  const double sg = sign >= 0 ? 1.0 : -1.0;
  const double d34 = std::pow(fr.delta, 0.75);
  const double k = kappa(u, m);
  return {sg * (k + b.x_hat * fr.mu * d34), sg * b.y_hat * fr.mu * fr.mu * d34, u, v};
}

inline OuterAA to_outer_action_angle(const BlowupPoint& b, const ScaleFrame& fr,
                                     const ModelSpec& m) {
  const double u = fr.mu * fr.mu * b.u_hat;
  const double F = outer_frequency(b.u_hat, fr, m);
  const double w = 1.0 + m.kinetic(0.0, 0.0, u).value;
  const double x0 = std::sqrt(F / w) * b.x_hat;
  const double y0 = std::sqrt(w / F) * b.y_hat;
  OuterAA aa;
  aa.z0_hat = 0.5 * (x0 * x0 + y0 * y0);
  aa.w0 = aa.z0_hat == 0.0 ? 0.0 : wrap_two_pi(std::atan2(y0, x0));
  return aa;
}

inline BlowupPoint from_outer_action_angle(const OuterAA& aa, double u_hat, const ScaleFrame& fr,
                                           const ModelSpec& m) {
  const double u = fr.mu * fr.mu * u_hat;
  const double F = outer_frequency(u_hat, fr, m);
  const double w = 1.0 + m.kinetic(0.0, 0.0, u).value;
  const double r = std::sqrt(2.0 * aa.z0_hat);
  return {std::sqrt(w / F) * r * std::cos(aa.w0), std::sqrt(F / w) * r * std::sin(aa.w0), u_hat};
}

inline InnerAA to_inner_action_angle(const BlowupPoint& b, const ScaleFrame& fr,
                                     const ModelSpec& m, int sign) {
  const double u = fr.mu * fr.mu * b.u_hat;
  const double Om = inner_frequency(b.u_hat, fr, m);
  const double k2 = std::pow(kappa(u, m), 2);
  const double w = 1.0 + m.kinetic(k2, 0.0, u).value;
  const double xi0 = std::sqrt(Om / w) * b.x_hat;
  const double s0 = std::sqrt(w / Om) * b.y_hat;
  InnerAA aa;
  aa.rho0_hat = 0.5 * (xi0 * xi0 + s0 * s0);
  aa.phi0 = aa.rho0_hat == 0.0 ? 0.0 : wrap_two_pi(std::atan2(s0, xi0));
  aa.eta = sign >= 0 ? 1 : -1;
  return aa;
}

inline BlowupPoint from_inner_action_angle(const InnerAA& aa, double u_hat, const ScaleFrame& fr,
                                           const ModelSpec& m) {
  const double u = fr.mu * fr.mu * u_hat;
  const double Om = inner_frequency(u_hat, fr, m);
  const double k2 = std::pow(kappa(u, m), 2);
  const double w = 1.0 + m.kinetic(k2, 0.0, u).value;
  const double r = std::sqrt(2.0 * aa.rho0_hat);
  return {std::sqrt(w / Om) * r * std::cos(aa.phi0), std::sqrt(Om / w) * r * std::sin(aa.phi0),
          u_hat};
}

// |p|^2 = e^{2 pi z0} - 1.
inline double p_abs2(double z0_hat) { return std::expm1(2.0 * kPi * z0_hat); }

inline std::complex<double> p_value(double z0_hat, double lambda) {
  return std::sqrt(p_abs2(z0_hat)) * std::exp(std::complex<double>(0.0, lambda));
}

// rho0 from ln((1 + |p|^2) / (2 |Im p|)) / (2 pi).
inline double rho0_from_p(double z0_hat, double lambda) {
  const auto p = p_value(z0_hat, lambda);
  return std::log((1.0 + std::norm(p)) / (2.0 * std::abs(p.imag()))) / kTwoPi;
}

// The same action written through z0 and |sin lambda|.
inline double rho0_closed(double z0_hat, double lambda) {
  return 0.5 * z0_hat - std::log(-std::expm1(-kTwoPi * z0_hat)) / (4.0 * kPi) -
         std::log(2.0 * std::abs(std::sin(lambda))) / kTwoPi;
}

inline double Q_fun(double rho0_hat) {
  return -0.25 * kPi + 7.0 * rho0_hat * kLn2 - arg_gamma_imag(2.0 * rho0_hat);
}

// Pseudo-phase lambda from the connection phase l.
inline double lambda_from_l(double z0_hat, double l) {
  return 3.0 * z0_hat * kLn2 - 0.25 * kPi - arg_gamma_imag(z0_hat) - l;
}

// Admissible set: lambda away from {0, pi} mod pi, z0 away from ln2/(2 pi).
inline bool in_admissible_set(double z0_hat, double lambda, double c_inv) {
  if (!(z0_hat > 0.0)) return false;
  if (std::abs(z0_hat - kSingularAction) < c_inv) return false;
  const double r = std::fmod(wrap_two_pi(lambda), kPi);
  return r >= c_inv && r <= kPi - c_inv;
}

// Branch sign: + for lambda in (pi, 2 pi), - for lambda in (0, pi).
inline int eta_of_lambda(double lambda) { return wrap_two_pi(lambda) > kPi ? 1 : -1; }

// Inner data at u_hat = +u_star_hat given (z0, lambda).
inline InnerAA crossing_from_lambda(double z0_hat, double lambda, const ScaleFrame& fr,
                                    double c_inv = 0.05,
                                    PhaseConvention conv = PhaseConvention::corrected) {
  if (!in_admissible_set(z0_hat, lambda, c_inv))
    throw OutsideDomain("crossing_map: (z0, lambda) outside the admissible set");
  const auto p = p_value(z0_hat, lambda);
  const auto one_p2 = 1.0 + p * p;
  if (std::abs(one_p2) < 1e-12) throw OutsideDomain("crossing_map: 1 + p^2 = 0");
  InnerAA out;
  out.rho0_hat = rho0_from_p(z0_hat, lambda);
  const double theta = Q_fun(out.rho0_hat) - std::arg(one_p2);
  const double us = fr.u_star_hat;
  const double shift = conv == PhaseConvention::corrected ? theta + kPi : -theta;
  out.phi0 = wrap_two_pi(-2.0 * std::numbers::sqrt2 / 3.0 * std::pow(us / fr.delta, 1.5) +
                         3.0 * out.rho0_hat * std::log(us / fr.delta) + shift);
  out.eta = eta_of_lambda(lambda);
  out.error_estimate = std::pow(fr.delta, 0.75);
  return out;
}

// Connection phase l solved from w0 at u_hat = -u_star_hat.
inline double connection_phase(const OuterAA& aa, const ScaleFrame& fr) {
  const double us = fr.u_star_hat;
  return aa.w0 - 2.0 / 3.0 * std::pow(us / fr.delta, 1.5) - 1.5 * aa.z0_hat * std::log(us / fr.delta) +
         0.5 * kPi;
}

inline double crossing_lambda(const OuterAA& aa, const ScaleFrame& fr) {
  return lambda_from_l(aa.z0_hat, connection_phase(aa, fr));
}

inline InnerAA crossing_map(const OuterAA& aa, const ScaleFrame& fr, double c_inv = 0.05,
                            PhaseConvention conv = PhaseConvention::corrected) {
  return crossing_from_lambda(aa.z0_hat, crossing_lambda(aa, fr), fr, c_inv, conv);
}

// Averaged map from u = -(pi - tau/2) to u_hat = -u_star_hat.
inline OuterAA outer_map(const OuterAA& aa, const ScaleFrame& fr, const ModelConstants& k) {
  const double us = fr.u_star_hat;
  OuterAA out;
  out.z0_hat = aa.z0_hat;
  out.w0 = wrap_two_pi(aa.w0 - k.e3 / fr.eps -
                       (std::log(k.e4 / fr.eps) - 1.5 * std::log(us / fr.delta)) * aa.z0_hat +
                       2.0 / 3.0 * std::pow(us / fr.delta, 1.5));
  return out;
}

// Averaged map from u_hat = +u_star_hat to u = tau/2.
inline InnerAA inner_map(const InnerAA& aa, const ScaleFrame& fr, const ModelConstants& k) {
  const double us = fr.u_star_hat;
  InnerAA out = aa;
  out.phi0 = wrap_two_pi(aa.phi0 - std::numbers::sqrt2 * k.e1 / fr.eps +
                         (2.0 * std::log(k.e2 / fr.eps) - 3.0 * std::log(us / fr.delta)) * aa.rho0_hat +
                         2.0 * std::numbers::sqrt2 / 3.0 * std::pow(us / fr.delta, 1.5));
  out.error_estimate = aa.error_estimate + fr.inner_budget;
  return out;
}

namespace detail {

template <class F>
double gk_integrate(F&& f, double a, double b, double tol, const char* what) {
  double err = 0.0;
  const double val =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, tol, &err);
  if (!std::isfinite(val) || err > 1e3 * tol * std::max(1.0, std::abs(val)))
    throw QuadratureFail(std::string("compute_constants: ") + what + " missed tolerance");
  return val;
}

// Polynomial extrapolation to x = 0 through (xs, ys).
inline double neville_at_zero(const std::vector<double>& xs, std::vector<double> ys) {
  const std::size_t n = xs.size();
  for (std::size_t m = 1; m < n; ++m) {
    for (std::size_t i = 0; i + m < n; ++i) {
      ys[i] = (xs[i + m] * ys[i] - xs[i] * ys[i + 1]) / (xs[i + m] - xs[i]);
    }
  }
  return ys[0];
}

}  // namespace detail

inline ModelConstants compute_constants(const ModelSpec& m, double quad_tol = 1e-12) {
  ModelConstants k;
  k.quad_tol = quad_tol;
  const double a_in = 0.5 * m.tau;
  const double a_out = kPi - 0.5 * m.tau;
  auto theta = [&](double u) { return vartheta(u, m); };
  auto neg_f = [&](double u) { return -m.f(-u).value; };

  // u = s^2 removes the square-root endpoint behaviour.
  k.e1 = detail::gk_integrate(
      [&](double s) { return s == 0.0 ? 0.0 : 2.0 * s * std::sqrt(theta(s * s)); }, 0.0,
      std::sqrt(a_in), quad_tol, "e1");
  k.e3 = detail::gk_integrate(
      [&](double s) { return s == 0.0 ? 0.0 : 2.0 * s * std::sqrt(neg_f(s * s)); }, 0.0,
      std::sqrt(a_out), quad_tol, "e3");

  // Log variable t = ln u for the 1/u kernels.
  k.u_star_table = {1e-2, 1e-3, 1e-4};
  for (double us : k.u_star_table) {
    const double i2 = detail::gk_integrate(
        [&](double t) { const double u = std::exp(t); return u / theta(u); }, std::log(us),
        std::log(a_in), quad_tol, "C2");
    const double i4 = detail::gk_integrate(
        [&](double t) { const double u = std::exp(t); return u / neg_f(u); }, std::log(us),
        std::log(a_out), quad_tol, "C4");
    k.C2_table.push_back(0.5 * i2 + 0.5 * std::log(us));
    k.C4_table.push_back(i4 + std::log(us));
  }
  k.C2 = detail::neville_at_zero(k.u_star_table, k.C2_table);
  k.C4 = detail::neville_at_zero(k.u_star_table, k.C4_table);
  k.e2 = std::exp(3.0 * k.C2);
  k.e4_raw = std::exp(k.C4);
  k.e4 = std::pow(k.e4_raw, 1.5);
  return k;
}

// delta = eps^a with a kept below 4/21 so that eps^{2/3} delta^{-7/2} -> 0.
inline double delta_schedule(double eps, double exponent = 0.15) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("delta_schedule: eps must lie in (0, 1)");
  const double a = std::min(exponent, 0.95 * 4.0 / 21.0);
  return std::pow(eps, a);
}

inline ScaleFrame scheduled_frame(double eps, double exponent = 0.15, double u_star_hat = 1.0) {
  return make_frame(eps, delta_schedule(eps, exponent), u_star_hat);
}

}  // namespace slowfast
