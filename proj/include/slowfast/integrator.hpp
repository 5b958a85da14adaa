#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace slowfast {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class JacobianMode { analytic, finite_difference };

struct IntegratorConfig {
  double h = 0.005;
  double newton_tol = 1e-13;
  int max_newton = 50;
  JacobianMode jacobian_mode = JacobianMode::analytic;
  int jacobian_reuse = 10;
};

inline void validate(const IntegratorConfig& cfg) {
  if (!(cfg.h > 0.0)) throw DomainError("IntegratorConfig: h must be positive");
  if (!(cfg.newton_tol >= 1e-14)) throw DomainError("IntegratorConfig: newton_tol below 1e-14");
  if (cfg.max_newton < 1) throw DomainError("IntegratorConfig: max_newton must be >= 1");
}

// Two-stage Gauss-Legendre tableau.
namespace gl2 {
inline const double sqrt3 = std::sqrt(3.0);
inline const double c1 = 0.5 - sqrt3 / 6.0;
inline const double c2 = 0.5 + sqrt3 / 6.0;
inline const double a11 = 0.25;
inline const double a12 = 0.25 - sqrt3 / 6.0;
inline const double a21 = 0.25 + sqrt3 / 6.0;
inline const double a22 = 0.25;
inline constexpr double b1 = 0.5;
inline constexpr double b2 = 0.5;
}  // namespace gl2

// A planar non-autonomous field z' = F(t, z) with its Jacobian.
template <class S>
concept PlanarSystem = requires(const S& s, double t, const Vec2& z) {
  { s.rhs(t, z) } -> std::convertible_to<Vec2>;
  { s.jacobian(t, z) } -> std::convertible_to<Mat2>;
};

template <PlanarSystem S>
Mat2 field_jacobian(const S& sys, double t, const Vec2& z, JacobianMode mode) {
  if (mode == JacobianMode::analytic) return sys.jacobian(t, z);
  Mat2 J;
  for (int k = 0; k < 2; ++k) {
    const double d = 1e-7 * std::max(1.0, std::abs(z[k]));
    Vec2 zp = z, zm = z;
    zp[k] += d;
    zm[k] -= d;
    J.col(k) = (sys.rhs(t, zp) - sys.rhs(t, zm)) / (2.0 * d);
  }
  return J;
}

struct GL2Stages {
  Vec2 z_next;
  Vec2 Z1, Z2;
  Vec2 K1, K2;
  int iterations = 0;
};

template <PlanarSystem S>
GL2Stages gl2_solve(const S& sys, double t, const Vec2& z, double h, const IntegratorConfig& cfg) {
  using namespace gl2;
  const double t1 = t + c1 * h, t2 = t + c2 * h;
  const Vec2 f0 = sys.rhs(t, z);
  Vec2 K1 = sys.rhs(t1, z + c1 * h * f0);
  Vec2 K2 = sys.rhs(t2, z + c2 * h * f0);

  Eigen::Matrix4d iter;
  Eigen::PartialPivLU<Eigen::Matrix4d> lu;
  auto refactor = [&](const Vec2& zc) {
    const Mat2 J = field_jacobian(sys, t + 0.5 * h, zc, cfg.jacobian_mode);
    iter.setIdentity();
    iter.block<2, 2>(0, 0) -= h * a11 * J;
    iter.block<2, 2>(0, 2) -= h * a12 * J;
    iter.block<2, 2>(2, 0) -= h * a21 * J;
    iter.block<2, 2>(2, 2) -= h * a22 * J;
    lu.compute(iter);
  };
  refactor(z);

  GL2Stages st;
  for (int it = 1; it <= cfg.max_newton; ++it) {
    const Vec2 Z1 = z + h * (a11 * K1 + a12 * K2);
    const Vec2 Z2 = z + h * (a21 * K1 + a22 * K2);
    Eigen::Vector4d r;
    r.head<2>() = K1 - sys.rhs(t1, Z1);
    r.tail<2>() = K2 - sys.rhs(t2, Z2);
    if (it > 1 && (it - 1) % cfg.jacobian_reuse == 0) refactor(0.5 * (Z1 + Z2));
    const Eigen::Vector4d dk = lu.solve(-r);
    K1 += dk.head<2>();
    K2 += dk.tail<2>();
    const double scale = 1.0 + std::max(K1.cwiseAbs().maxCoeff(), K2.cwiseAbs().maxCoeff());
    if (!std::isfinite(dk.norm())) break;
    if (dk.cwiseAbs().maxCoeff() <= cfg.newton_tol * scale) {
      st.K1 = K1;
      st.K2 = K2;
      st.Z1 = z + h * (a11 * K1 + a12 * K2);
      st.Z2 = z + h * (a21 * K1 + a22 * K2);
      st.z_next = z + h * (b1 * K1 + b2 * K2);
      st.iterations = it;
      return st;
    }
  }
  throw NewtonDiverged("gl2: stage equations did not converge; step size too large");
}

// Exact derivative of the discrete step z -> z_next at converged stages.
template <PlanarSystem S>
Mat2 gl2_step_derivative(const S& sys, double t, const GL2Stages& st, double h) {
  using namespace gl2;
  const Mat2 J1 = sys.jacobian(t + c1 * h, st.Z1);
  const Mat2 J2 = sys.jacobian(t + c2 * h, st.Z2);
  Eigen::Matrix4d A = Eigen::Matrix4d::Identity();
  A.block<2, 2>(0, 0) -= h * a11 * J1;
  A.block<2, 2>(0, 2) -= h * a12 * J1;
  A.block<2, 2>(2, 0) -= h * a21 * J2;
  A.block<2, 2>(2, 2) -= h * a22 * J2;
  Eigen::Matrix<double, 4, 2> rhs;
  rhs.topRows<2>() = J1;
  rhs.bottomRows<2>() = J2;
  const Eigen::Matrix<double, 4, 2> dK = A.partialPivLu().solve(rhs);
  return Mat2::Identity() + h * (b1 * dK.topRows<2>() + b2 * dK.bottomRows<2>());
}

// Fast subsystem of H with u = u0 + eps t; v is carried by quadrature.
class HamiltonianSystem {
 public:
  HamiltonianSystem(const ModelSpec& model, double eps, double u0)
      : model_(model), eps_(eps), u0_(u0) {}

  double u_at(double t) const { return u0_ + eps_ * t; }

  Vec2 rhs(double t, const Vec2& z) const {
    const double u = u_at(t);
    const auto p = hamiltonian_partials(z[0] * z[0], z[1] * z[1], u, 0.0, model_, profile(u));
    return {2.0 * z[1] * p.Hb, -2.0 * z[0] * p.Ha};
  }

  Mat2 jacobian(double t, const Vec2& z) const {
    const double u = u_at(t);
    const double x = z[0], y = z[1];
    const auto p = hamiltonian_partials(x * x, y * y, u, 0.0, model_, profile(u));
    Mat2 J;
    J << 4.0 * x * y * p.Hab, 2.0 * p.Hb + 4.0 * y * y * p.Hbb,
        -2.0 * p.Ha - 4.0 * x * x * p.Haa, -4.0 * x * y * p.Hab;
    return J;
  }

  // dv/dt
  double quadrature(double t, const Vec2& z) const {
    const double u = u_at(t);
    return -eps_ *
           hamiltonian_partials(z[0] * z[0], z[1] * z[1], u, 0.0, model_, profile(u)).Hu;
  }

 private:
  // The stage times repeat across Newton iterations, so f is cached per slot.
  ProfileJet profile(double u) const {
    for (int k = 0; k < 2; ++k) {
      if (cache_u_[k] == u) return cache_f_[k];
    }
    const int slot = next_;
    next_ ^= 1;
    cache_u_[slot] = u;
    cache_f_[slot] = model_.f(u);
    return cache_f_[slot];
  }

  const ModelSpec& model_;
  double eps_;
  double u0_;
  mutable std::array<double, 2> cache_u_{std::numeric_limits<double>::quiet_NaN(),
                                         std::numeric_limits<double>::quiet_NaN()};
  mutable std::array<ProfileJet, 2> cache_f_{};
  mutable int next_ = 0;
};

inline ExtendedState gl2_step(const ExtendedState& s, const ModelSpec& model, double eps,
                              const IntegratorConfig& cfg) {
  HamiltonianSystem sys(model, eps, s.u);
  const auto st = gl2_solve(sys, 0.0, Vec2(s.x, s.y), cfg.h, cfg);
  const double dv = cfg.h * (gl2::b1 * sys.quadrature(gl2::c1 * cfg.h, st.Z1) +
                             gl2::b2 * sys.quadrature(gl2::c2 * cfg.h, st.Z2));
  return {st.z_next[0], st.z_next[1], s.u + eps * cfg.h, s.v + dv};
}

struct FlowResult {
  ExtendedState state;
  Mat2 jacobian = Mat2::Identity();  // d(x, y)_end / d(x, y)_start when requested
  std::size_t steps = 0;
};

using FlowObserver = std::function<void(double t, const ExtendedState&)>;

// Integrates for time T: whole steps of size h, then one exact remainder step.
inline FlowResult flow_for_time(const ExtendedState& s0, const ModelSpec& model, double eps,
                                double T, const IntegratorConfig& cfg, bool variational = false,
                                const FlowObserver& observer = {}) {
  validate(cfg);
  if (!(T >= 0.0)) throw DomainError("flow_for_time: negative duration");
  HamiltonianSystem sys(model, eps, s0.u);
  Vec2 z(s0.x, s0.y);
  double v = s0.v;
  FlowResult out;
  const auto full = static_cast<std::size_t>(std::floor(T / cfg.h));
  const double rest = T - static_cast<double>(full) * cfg.h;
  const bool has_rest = rest > 1e-12 * cfg.h;
  const std::size_t n = full + (has_rest ? 1 : 0);
  if (observer) observer(0.0, s0);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * cfg.h;
    const double h = (k < full) ? cfg.h : rest;
    const auto st = gl2_solve(sys, t, z, h, cfg);
    v += h * (gl2::b1 * sys.quadrature(t + gl2::c1 * h, st.Z1) +
              gl2::b2 * sys.quadrature(t + gl2::c2 * h, st.Z2));
    if (variational) out.jacobian = gl2_step_derivative(sys, t, st, h) * out.jacobian;
    z = st.z_next;
    if (observer) observer(t + h, {z[0], z[1], sys.u_at(t + h), v});
  }
  out.state = {z[0], z[1], s0.u + eps * T, v};
  out.steps = n;
  return out;
}

inline FlowResult flow_to_section(const ExtendedState& s, const ModelSpec& model, double eps,
                                  double u_target, const IntegratorConfig& cfg,
                                  bool variational = false, const FlowObserver& observer = {}) {
  if (!(u_target >= s.u)) throw DomainError("flow_to_section: target behind current u");
  auto r = flow_for_time(s, model, eps, (u_target - s.u) / eps, cfg, variational, observer);
  r.state.u = u_target;
  return r;
}

enum class MonodromyMethod { variational, finite_difference };

inline Mat2 monodromy(const ExtendedState& initial, const ModelSpec& model, double eps,
                      double period, const IntegratorConfig& cfg,
                      MonodromyMethod method = MonodromyMethod::variational) {
  if (!(period > 0.0)) throw DomainError("monodromy: period must be positive");
  if (method == MonodromyMethod::variational)
    return flow_for_time(initial, model, eps, period, cfg, true).jacobian;
  constexpr double d = 1e-7;
  Mat2 J;
  for (int k = 0; k < 2; ++k) {
    ExtendedState p = initial, m = initial;
    (k == 0 ? p.x : p.y) += d;
    (k == 0 ? m.x : m.y) -= d;
    const auto ep = flow_for_time(p, model, eps, period, cfg).state;
    const auto em = flow_for_time(m, model, eps, period, cfg).state;
    J(0, k) = (ep.x - em.x) / (2.0 * d);
    J(1, k) = (ep.y - em.y) / (2.0 * d);
  }
  return J;
}

struct Trajectory {
  std::vector<double> t;
  std::vector<ExtendedState> states;
  std::size_t stride = 1;
};

inline Trajectory integrate_trajectory(const ExtendedState& s0, const ModelSpec& model, double eps,
                                       double T, const IntegratorConfig& cfg,
                                       std::size_t stride = 1) {
  Trajectory tr;
  tr.stride = stride == 0 ? 1 : stride;
  std::size_t k = 0;
  double last_t = 0.0;
  ExtendedState last = s0;
  flow_for_time(s0, model, eps, T, cfg, false, [&](double t, const ExtendedState& s) {
    if (k++ % tr.stride == 0) {
      tr.t.push_back(t);
      tr.states.push_back(s);
    }
    last_t = t;
    last = s;
  });
  if (tr.t.back() < last_t) {
    tr.t.push_back(last_t);
    tr.states.push_back(last);
  }
  return tr;
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& tr,
                                 const ModelSpec& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  out << "t,x,y,u,v,H\n";
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    const auto& s = tr.states[i];
    out << tr.t[i] << ',' << s.x << ',' << s.y << ',' << s.u << ',' << s.v << ','
        << eval_hamiltonian(s, model) << '\n';
  }
}

}  // namespace slowfast
