#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "errors.hpp"

namespace slowfast {

struct GammaImag {
  double arg_gamma = 0.0;      // continuous branch, -> -pi/2 - gamma*y as y -> 0+
  double log_abs_gamma = 0.0;  // ln |Gamma(iy)|
  double re_digamma = 0.0;     // Re psi(iy)
};

namespace detail {

// B_{2k} for k = 1..8.
inline constexpr std::array<double, 8> kBernoulli = {
    1.0 / 6.0,   -1.0 / 30.0,     1.0 / 42.0, -1.0 / 30.0,
    5.0 / 66.0,  -691.0 / 2730.0, 7.0 / 6.0,  -3617.0 / 510.0};

inline constexpr double kLiftRadius = 10.0;

// Stirling series for log Gamma(w), Re w > 0, |w| >= 10.
inline std::complex<double> stirling_log_gamma(std::complex<double> w) {
  const std::complex<double> inv = 1.0 / w;
  const std::complex<double> inv2 = inv * inv;
  std::complex<double> series = 0.0;
  std::complex<double> pw = inv;
  for (std::size_t k = 0; k < kBernoulli.size(); ++k) {
    const double n = 2.0 * static_cast<double>(k + 1);
    series += kBernoulli[k] / (n * (n - 1.0)) * pw;
    pw *= inv2;
  }
  return (w - 0.5) * std::log(w) - w + 0.5 * std::log(2.0 * std::numbers::pi) + series;
}

inline std::complex<double> stirling_digamma(std::complex<double> w) {
  const std::complex<double> inv = 1.0 / w;
  const std::complex<double> inv2 = inv * inv;
  std::complex<double> series = 0.0;
  std::complex<double> pw = inv2;
  for (std::size_t k = 0; k < kBernoulli.size(); ++k) {
    const double n = 2.0 * static_cast<double>(k + 1);
    series += kBernoulli[k] / n * pw;
    pw *= inv2;
  }
  return std::log(w) - 0.5 * inv - series;
}

}  // namespace detail

// log Gamma(iy) and psi(iy) by the recurrence lift to |z + n| >= 10.
// Each log(iy + k) has argument in (0, pi/2], so the imaginary part is continuous in y.
inline GammaImag gamma_on_imaginary_axis(double y) {
  if (!(y > 1e-6 && y < 100.0))
    throw DomainError("gamma_on_imaginary_axis: y outside (1e-6, 100)");
  const std::complex<double> z(0.0, y);
  std::complex<double> lift_log = 0.0;
  std::complex<double> lift_psi = 0.0;
  std::complex<double> w = z;
  while (std::abs(w) < detail::kLiftRadius) {
    lift_log += std::log(w);
    lift_psi += 1.0 / w;
    w += 1.0;
  }
  const std::complex<double> lg = detail::stirling_log_gamma(w) - lift_log;
  const std::complex<double> psi = detail::stirling_digamma(w) - lift_psi;
  return {lg.imag(), lg.real(), psi.real()};
}

inline double arg_gamma_imag(double y) { return gamma_on_imaginary_axis(y).arg_gamma; }
inline double re_digamma_imag(double y) { return gamma_on_imaginary_axis(y).re_digamma; }

// d/dz0 of 3 z0 ln2 - arg Gamma(i z0).
inline double g_fun(double z0_hat) {
  return 3.0 * std::numbers::ln2 - re_digamma_imag(z0_hat);
}

// d/drho of 7 rho ln2 - arg Gamma(2 i rho).
inline double q_fun(double rho0_hat) {
  return 7.0 * std::numbers::ln2 - 2.0 * re_digamma_imag(2.0 * rho0_hat);
}

}  // namespace slowfast
