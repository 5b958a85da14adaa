#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "asymptotic_maps.hpp"
#include "errors.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "orbits.hpp"
#include "predictor.hpp"

namespace slowfast {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

struct IntegrateSettings {
  double x0 = 0.1;
  double y0 = 0.0;
  double u0 = -kPi / 2.0;
  double v0 = 0.0;
  double duration = 0.0;  // 0: one slow period
  int stride = 10;
};

struct PainleveSettings {
  int n_seeds = 16;
  double z_lo = 0.2;
  double z_hi = 1.5;
  std::vector<double> deltas{0.1, 0.05, 0.02, 0.01};
  double step_factor = 0.01;
};

struct RunConfig {
  std::string command;
  json model = {{"builtin", "toy"}};
  std::vector<double> eps{0.08};
  IntegratorConfig integrator;
  double x_lo = 0.0;
  double x_hi = 0.5;
  CensusControls census;
  double delta_exponent = 0.15;
  double u_star_hat = 1.0;
  double c_inv = 0.05;
  double quad_tol = 1e-12;
  PhaseConvention convention = PhaseConvention::corrected;
  std::string output_dir = "out";
  std::uint64_t seed = 20240611;
  SolveOptions predict;
  SweepOptions sweep;
  CoverMode cover_mode = CoverMode::part2;
  CoverOptions cover;
  ContinuationOptions cont;
  PainleveSettings painleve;
  IntegrateSettings integrate;
};

namespace detail {

// Rejects keys outside the allowed set so that typos do not pass silently.
inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline std::vector<double> read_table(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  auto v = j.at(key).get<std::vector<double>>();
  if (v.size() < 8) throw ConfigError(std::string("model.tables.") + key + ": need >= 8 samples");
  return v;
}

}  // namespace detail

inline PhaseConvention parse_convention(const std::string& s) {
  if (s == "corrected") return PhaseConvention::corrected;
  if (s == "paper") return PhaseConvention::paper;
  throw ConfigError("convention must be 'corrected' or 'paper', got '" + s + "'");
}

inline CoverMode parse_cover_mode(const std::string& s) {
  if (s == "part2") return CoverMode::part2;
  if (s == "part3") return CoverMode::part3;
  if (s == "part4") return CoverMode::part4;
  throw ConfigError("cover mode must be part2, part3 or part4, got '" + s + "'");
}

inline std::string to_string(CoverMode m) {
  return m == CoverMode::part2 ? "part2" : m == CoverMode::part3 ? "part3" : "part4";
}

// Model source: {"builtin": "toy"}, {"builtin": "perturbed", "alpha": ..}, or
// {"tables": {...}} / {"table_file": path} with the ModelTables fields.
inline ModelSpec load_model(const json& src, const std::filesystem::path& base = {}) {
  detail::check_keys(src, {"builtin", "alpha", "beta", "gamma", "zeta", "tables", "table_file"},
                     "model");
  if (src.contains("builtin")) {
    const auto name = src.at("builtin").get<std::string>();
    if (name == "toy") return toy_model();
    if (name == "perturbed") {
      double a = 0.2, b = 0.1, g = 0.3, z = 0.1;
      detail::read(src, "alpha", a, "model");
      detail::read(src, "beta", b, "model");
      detail::read(src, "gamma", g, "model");
      detail::read(src, "zeta", z, "model");
      return perturbed_model(a, b, g, z);
    }
    throw ConfigError("model.builtin: unknown model '" + name + "'");
  }
  json tables;
  std::string name = "tabulated";
  if (src.contains("tables")) {
    tables = src.at("tables");
  } else if (src.contains("table_file")) {
    std::filesystem::path p = src.at("table_file").get<std::string>();
    if (p.is_relative() && !base.empty()) p = base / p;
    std::ifstream in(p);
    if (!in) throw ConfigError("model.table_file: cannot open " + p.string());
    try {
      tables = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("model.table_file: " + std::string(e.what()));
    }
    name = p.stem().string();
  } else {
    throw ConfigError("model: need one of builtin, tables, table_file");
  }
  detail::check_keys(tables, {"tau", "f", "m_a", "m_b", "m_0", "v_a", "v_0"}, "model.tables");
  ModelTables t;
  detail::read(tables, "tau", t.tau, "model.tables");
  t.f = detail::read_table(tables, "f");
  t.m_a = detail::read_table(tables, "m_a");
  t.m_b = detail::read_table(tables, "m_b");
  t.m_0 = detail::read_table(tables, "m_0");
  t.v_a = detail::read_table(tables, "v_a");
  t.v_0 = detail::read_table(tables, "v_0");
  return tabulated_model(t, name);
}

inline RunConfig parse_config(const json& j) {
  using detail::check_keys;
  using detail::read;
  check_keys(j,
             {"command", "model", "eps", "integrator", "scan", "delta_exponent", "u_star_hat",
              "c_inv", "quad_tol", "convention", "output_dir", "seed", "predict", "sweep", "cover",
              "continue", "painleve", "integrate"},
             "config");
  RunConfig c;
  read(j, "command", c.command, "config");
  if (j.contains("model")) c.model = j.at("model");
  if (j.contains("eps")) {
    const auto& e = j.at("eps");
    c.eps = e.is_array() ? e.get<std::vector<double>>() : std::vector<double>{e.get<double>()};
  }
  if (j.contains("integrator")) {
    const auto& s = j.at("integrator");
    check_keys(s, {"h", "newton_tol", "max_newton", "jacobian_mode", "jacobian_reuse"}, "integrator");
    read(s, "h", c.integrator.h, "integrator");
    read(s, "newton_tol", c.integrator.newton_tol, "integrator");
    read(s, "max_newton", c.integrator.max_newton, "integrator");
    read(s, "jacobian_reuse", c.integrator.jacobian_reuse, "integrator");
    if (s.contains("jacobian_mode")) {
      const auto m = s.at("jacobian_mode").get<std::string>();
      if (m == "analytic") c.integrator.jacobian_mode = JacobianMode::analytic;
      else if (m == "finite_difference") c.integrator.jacobian_mode = JacobianMode::finite_difference;
      else throw ConfigError("integrator.jacobian_mode: unknown value '" + m + "'");
    }
  }
  if (j.contains("scan")) {
    const auto& s = j.at("scan");
    check_keys(s,
               {"x_lo", "x_hi", "base_grid", "log_grid", "log_grid_floor", "refine_threshold",
                "refine_min_width", "dedup", "stability_margin", "period_mult"},
               "scan");
    read(s, "x_lo", c.x_lo, "scan");
    read(s, "x_hi", c.x_hi, "scan");
    read(s, "base_grid", c.census.base_grid, "scan");
    read(s, "log_grid", c.census.log_grid, "scan");
    read(s, "log_grid_floor", c.census.log_grid_floor, "scan");
    read(s, "refine_threshold", c.census.refine_threshold, "scan");
    read(s, "refine_min_width", c.census.refine_min_width, "scan");
    read(s, "dedup", c.census.dedup, "scan");
    read(s, "stability_margin", c.census.stability_margin, "scan");
    read(s, "period_mult", c.census.period_mult, "scan");
  }
  read(j, "delta_exponent", c.delta_exponent, "config");
  read(j, "u_star_hat", c.u_star_hat, "config");
  read(j, "c_inv", c.c_inv, "config");
  read(j, "quad_tol", c.quad_tol, "config");
  if (j.contains("convention")) c.convention = parse_convention(j.at("convention").get<std::string>());
  read(j, "output_dir", c.output_dir, "config");
  read(j, "seed", c.seed, "config");
  if (j.contains("predict")) {
    const auto& s = j.at("predict");
    check_keys(s, {"z_lo", "z_hi", "branches", "samples_per_strip"}, "predict");
    read(s, "z_lo", c.predict.z_lo, "predict");
    read(s, "z_hi", c.predict.z_hi, "predict");
    read(s, "branches", c.predict.branches, "predict");
    read(s, "samples_per_strip", c.predict.samples_per_strip, "predict");
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    check_keys(s, {"n_values", "inv_log_lo", "inv_log_hi", "z_lo", "z_hi", "branches"}, "sweep");
    read(s, "n_values", c.sweep.n_values, "sweep");
    read(s, "inv_log_lo", c.sweep.inv_log_lo, "sweep");
    read(s, "inv_log_hi", c.sweep.inv_log_hi, "sweep");
    read(s, "z_lo", c.sweep.z_lo, "sweep");
    read(s, "z_hi", c.sweep.z_hi, "sweep");
    read(s, "branches", c.sweep.branches, "sweep");
  }
  if (j.contains("cover")) {
    const auto& s = j.at("cover");
    check_keys(s, {"mode", "z_start", "z_end", "n_steps", "c1", "Z0_hat", "w0"}, "cover");
    if (s.contains("mode")) c.cover_mode = parse_cover_mode(s.at("mode").get<std::string>());
    read(s, "z_start", c.cover.z_start, "cover");
    read(s, "z_end", c.cover.z_end, "cover");
    read(s, "n_steps", c.cover.n_steps, "cover");
    read(s, "c1", c.cover.c1, "cover");
    read(s, "Z0_hat", c.cover.Z0_hat, "cover");
    read(s, "w0", c.cover.w0, "cover");
  }
  if (j.contains("continue")) {
    const auto& s = j.at("continue");
    check_keys(s,
               {"n_seeds", "min_abs_cot", "z_lo", "z_hi", "branches", "max_iterations", "tolerance",
                "max_step"},
               "continue");
    read(s, "n_seeds", c.cont.n_seeds, "continue");
    read(s, "min_abs_cot", c.cont.min_abs_cot, "continue");
    read(s, "z_lo", c.cont.z_lo, "continue");
    read(s, "z_hi", c.cont.z_hi, "continue");
    read(s, "max_iterations", c.cont.max_iterations, "continue");
    read(s, "tolerance", c.cont.tolerance, "continue");
    read(s, "branches", c.cont.branches, "continue");
    read(s, "max_step", c.cont.max_step, "continue");
  }
  if (j.contains("painleve")) {
    const auto& s = j.at("painleve");
    check_keys(s, {"n_seeds", "z_lo", "z_hi", "deltas", "step_factor"}, "painleve");
    read(s, "n_seeds", c.painleve.n_seeds, "painleve");
    read(s, "z_lo", c.painleve.z_lo, "painleve");
    read(s, "z_hi", c.painleve.z_hi, "painleve");
    read(s, "deltas", c.painleve.deltas, "painleve");
    read(s, "step_factor", c.painleve.step_factor, "painleve");
  }
  if (j.contains("integrate")) {
    const auto& s = j.at("integrate");
    check_keys(s, {"x0", "y0", "u0", "v0", "duration", "stride"}, "integrate");
    read(s, "x0", c.integrate.x0, "integrate");
    read(s, "y0", c.integrate.y0, "integrate");
    read(s, "u0", c.integrate.u0, "integrate");
    read(s, "v0", c.integrate.v0, "integrate");
    read(s, "duration", c.integrate.duration, "integrate");
    read(s, "stride", c.integrate.stride, "integrate");
  }
  return c;
}

inline RunConfig load_config_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open config " + p.string());
  try {
    return parse_config(json::parse(in, nullptr, true, true));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + p.string() + ": " + e.what());
  }
}

// Range checks that do not depend on the command.
inline void validate(const RunConfig& c) {
  validate(c.integrator);
  for (double e : c.eps)
    if (!(e > 0.0 && e < 1.0)) throw ConfigError("eps values must lie in (0, 1)");
  if (c.eps.empty()) throw ConfigError("eps: at least one value required");
  if (!(c.x_hi > c.x_lo && c.x_lo >= 0.0)) throw ConfigError("scan: need 0 <= x_lo < x_hi");
  if (!(c.c_inv > 0.0)) throw ConfigError("c_inv must be positive");
  if (!(c.u_star_hat > 0.0)) throw ConfigError("u_star_hat must be positive");
  if (c.census.period_mult != 1 && c.census.period_mult != 2)
    throw ConfigError("scan.period_mult must be 1 or 2");
}

// Echo of the effective configuration for the metadata sidecar.
inline json to_json(const RunConfig& c) {
  return {
      {"command", c.command},
      {"model", c.model},
      {"eps", c.eps},
      {"integrator",
       {{"h", c.integrator.h},
        {"newton_tol", c.integrator.newton_tol},
        {"max_newton", c.integrator.max_newton},
        {"jacobian_mode",
         c.integrator.jacobian_mode == JacobianMode::analytic ? "analytic" : "finite_difference"},
        {"jacobian_reuse", c.integrator.jacobian_reuse}}},
      {"scan",
       {{"x_lo", c.x_lo},
        {"x_hi", c.x_hi},
        {"base_grid", c.census.base_grid},
        {"log_grid", c.census.log_grid},
        {"log_grid_floor", c.census.log_grid_floor},
        {"refine_threshold", c.census.refine_threshold},
        {"refine_min_width", c.census.refine_min_width},
        {"dedup", c.census.dedup},
        {"stability_margin", c.census.stability_margin},
        {"period_mult", c.census.period_mult}}},
      {"delta_exponent", c.delta_exponent},
      {"u_star_hat", c.u_star_hat},
      {"c_inv", c.c_inv},
      {"quad_tol", c.quad_tol},
      {"convention", to_string(c.convention)},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"predict",
       {{"z_lo", c.predict.z_lo},
        {"z_hi", c.predict.z_hi},
        {"branches", c.predict.branches},
        {"samples_per_strip", c.predict.samples_per_strip}}},
      {"sweep",
       {{"n_values", c.sweep.n_values},
        {"inv_log_lo", c.sweep.inv_log_lo},
        {"inv_log_hi", c.sweep.inv_log_hi},
        {"z_lo", c.sweep.z_lo},
        {"z_hi", c.sweep.z_hi},
        {"branches", c.sweep.branches}}},
      {"cover",
       {{"mode", to_string(c.cover_mode)},
        {"z_start", c.cover.z_start},
        {"z_end", c.cover.z_end},
        {"n_steps", c.cover.n_steps},
        {"c1", c.cover.c1},
        {"Z0_hat", c.cover.Z0_hat},
        {"w0", c.cover.w0}}},
      {"continue",
       {{"n_seeds", c.cont.n_seeds},
        {"min_abs_cot", c.cont.min_abs_cot},
        {"z_lo", c.cont.z_lo},
        {"z_hi", c.cont.z_hi},
        {"max_iterations", c.cont.max_iterations},
        {"branches", c.cont.branches},
        {"tolerance", c.cont.tolerance},
        {"max_step", c.cont.max_step}}},
      {"painleve",
       {{"n_seeds", c.painleve.n_seeds},
        {"z_lo", c.painleve.z_lo},
        {"z_hi", c.painleve.z_hi},
        {"deltas", c.painleve.deltas},
        {"step_factor", c.painleve.step_factor}}},
      {"integrate",
       {{"x0", c.integrate.x0},
        {"y0", c.integrate.y0},
        {"u0", c.integrate.u0},
        {"v0", c.integrate.v0},
        {"duration", c.integrate.duration},
        {"stride", c.integrate.stride}}},
  };
}

}  // namespace slowfast
