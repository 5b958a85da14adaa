#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "slowfast/config.hpp"
#include "slowfast/painleve.hpp"

namespace fs = std::filesystem;
using namespace slowfast;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw ConfigError("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  CsvWriter& operator<<(double v) { return put(fmt(v)); }
  CsvWriter& operator<<(int v) { return put(std::to_string(v)); }
  CsvWriter& operator<<(long v) { return put(std::to_string(v)); }
  CsvWriter& operator<<(std::size_t v) { return put(std::to_string(v)); }
  CsvWriter& operator<<(const std::string& v) { return put(v); }
  CsvWriter& operator<<(const char* v) { return put(v); }
  void end() {
    out_ << '\n';
    first_ = true;
  }

 private:
  CsvWriter& put(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }
  std::ofstream out_;
  bool first_ = true;
};

struct Run {
  RunConfig cfg;
  fs::path config_dir;
  fs::path out;
  ModelSpec model;
  json results = json::object();
  std::vector<std::string> files;
  json columns = json::object();

  fs::path file(const std::string& name, const std::string& module,
                const std::vector<std::string>& header) {
    files.push_back(name);
    columns[name] = {{"module", module}, {"version", kVersion}, {"columns", header},
                     {"units", "dimensionless"}};
    return out / name;
  }
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json versions() {
  return {{"slowfast", kVersion},
          {"compiler", __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                        "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION}};
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

ModelConstants constants_for(const Run& r) { return compute_constants(r.model, r.cfg.quad_tol); }

// ---- subcommands ----

void cmd_validate(Run& r) {
  const auto rep = validate_assumptions(r.model);
  CsvWriter csv(r.file("validate.csv", "model", {"assumption", "passed", "worst_value", "worst_u"}),
                {"assumption", "passed", "worst_value", "worst_u"});
  for (const auto& c : rep.checks) {
    csv << c.name << (c.passed ? 1 : 0) << c.worst_value << c.worst_u;
    csv.end();
    r.results[c.name] = c.passed;
  }
  r.results["all_passed"] = rep.all_passed();
}

void cmd_integrate(Run& r) {
  const double eps = r.cfg.eps.front();
  const auto& s = r.cfg.integrate;
  const double T = s.duration > 0.0 ? s.duration : kTwoPi / eps;
  const ExtendedState s0{s.x0, s.y0, s.u0, s.v0};
  const auto tr = integrate_trajectory(s0, r.model, eps, T, r.cfg.integrator,
                                       static_cast<std::size_t>(std::max(1, s.stride)));
  write_trajectory_csv(r.file("trajectory.csv", "integrator", {"t", "x", "y", "u", "v", "H"}).string(),
                       tr, r.model);
  double drift = 0.0;
  const double h0 = eval_hamiltonian(tr.states.front(), r.model);
  for (const auto& st : tr.states) drift = std::max(drift, std::abs(eval_hamiltonian(st, r.model) - h0));
  r.results = {{"samples", tr.t.size()}, {"max_energy_drift", drift}, {"duration", T}};
}

std::vector<CensusRow> run_census(Run& r, bool write_orbits) {
  std::vector<CensusRow> rows;
  for (double eps : r.cfg.eps) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = scan_census(eps, r.cfg.x_lo, r.cfg.x_hi, r.model, r.cfg.integrator, r.cfg.census);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(res.row);
    r.results["runtime_seconds"][short_fmt(eps)] = secs;
    if (!write_orbits) continue;
    const std::vector<std::string> hdr{"x0", "y0", "period_mult", "residual", "trace", "stability",
                                       "symmetry", "max_singular_distance", "iterations"};
    CsvWriter csv(r.file("orbits_eps" + short_fmt(eps) + ".csv", "orbits", hdr), hdr);
    for (const auto& o : res.orbits) {
      csv << o.x0 << o.y0 << o.period_mult << o.residual << o.trace << to_string(o.stability)
          << to_string(o.symmetry) << o.max_singular_distance << o.iterations;
      csv.end();
    }
  }
  return rows;
}

void write_census_rows(Run& r, const std::vector<CensusRow>& rows) {
  const std::vector<std::string> hdr{"eps",        "POS",       "SPOS",          "SPOS_small",
                                     "UPOS_small", "marginal",  "period2",       "x_lo",
                                     "x_hi",       "base_grid", "log_grid",      "refine_threshold",
                                     "refine_min_width", "evaluations", "failures", "h"};
  CsvWriter csv(r.file("census.csv", "orbits", hdr), hdr);
  for (const auto& c : rows) {
    csv << c.eps << c.pos_count << c.spos_count << c.spos_small_count << c.upos_small_count
        << c.marginal_count << c.period2_count << c.x_lo << c.x_hi << c.base_grid << c.log_grid
        << c.refine_threshold << c.refine_min_width << c.evaluations << c.failures << c.integrator.h;
    csv.end();
    r.results["rows"].push_back({{"eps", c.eps},
                                 {"POS", c.pos_count},
                                 {"SPOS", c.spos_count},
                                 {"SPOS_small", c.spos_small_count},
                                 {"UPOS_small", c.upos_small_count}});
  }
}

void cmd_census(Run& r) { write_census_rows(r, run_census(r, true)); }

std::vector<std::pair<double, double>> read_census_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("fit: cannot open census file " + p.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  const auto col = [&](const std::string& n) {
    const auto it = std::find(names.begin(), names.end(), n);
    if (it == names.end()) throw ConfigError("fit: census file lacks column " + n);
    return static_cast<std::size_t>(it - names.begin());
  };
  const std::size_t ie = col("eps"), ic = col("UPOS_small");
  std::vector<std::pair<double, double>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    out.push_back({std::stod(cells.at(ie)), std::stod(cells.at(ic))});
  }
  return out;
}

void cmd_fit(Run& r, const std::string& census_file) {
  std::vector<double> eps, counts;
  if (!census_file.empty()) {
    fs::path p = census_file;
    for (const auto& [e, c] : read_census_csv(p)) {
      eps.push_back(e);
      counts.push_back(c);
    }
    r.results["census_file"] = census_file;
  } else {
    const auto rows = run_census(r, false);
    write_census_rows(r, rows);
    for (const auto& c : rows) {
      eps.push_back(c.eps);
      counts.push_back(c.upos_small_count);
    }
  }
  const auto f = fit_log_square(eps, counts);
  const std::vector<std::string> hdr{"eps", "ln2_inv_eps", "UPOS_small", "fitted", "relative_error"};
  CsvWriter csv(r.file("fit.csv", "orbits", hdr), hdr);
  double worst = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double l = std::log(1.0 / eps[i]);
    csv << eps[i] << l * l << counts[i] << f.a * l * l + f.b << f.relative_errors[i];
    csv.end();
    worst = std::max(worst, f.relative_errors[i]);
  }
  r.results["a"] = f.a;
  r.results["b"] = f.b;
  r.results["max_relative_error"] = worst;
}

void cmd_predict(Run& r) {
  const auto k = constants_for(r);
  const std::vector<std::string> hdr{"eps",       "case",      "z0_hat",          "w0",
                                     "lambda_l",  "rho0_hat",  "residual",        "trace",
                                     "stability", "period_mult", "symmetry",      "x0",
                                     "y0"};
  CsvWriter csv(r.file("seeds.csv", "predictor", hdr), hdr);
  for (double eps : r.cfg.eps) {
    const auto ctx = make_context(eps, k, r.cfg.c_inv, r.cfg.convention);
    int n_stable = 0, n_total = 0;
    for (SeedCase sc : {SeedCase::i, SeedCase::ii}) {
      for (const auto& s : solve_fixed_points(sc, ctx, r.cfg.predict)) {
        const auto p = seed_to_initial_condition(s, eps, r.model);
        csv << eps << (sc == SeedCase::i ? "i" : "ii") << s.z0_hat << s.w0 << s.lambda_l
            << s.rho0_hat << s.residual << s.predicted_trace << to_string(s.predicted_stability)
            << s.period_mult << s.symmetry << p.x << p.y;
        csv.end();
        ++n_total;
        if (s.predicted_stability == Stability::stable) ++n_stable;
      }
    }
    r.results["per_eps"][short_fmt(eps)] = {{"seeds", n_total}, {"stable", n_stable}};
  }
}

void cmd_continue(Run& r) {
  const auto k = constants_for(r);
  auto opt = r.cfg.cont;
  opt.c_inv = r.cfg.c_inv;
  opt.convention = r.cfg.convention;
  const double eps = r.cfg.eps.front();
  const auto st = continuation_study(eps, r.model, k, r.cfg.integrator, opt);
  const std::vector<std::string> hdr{"z0_hat", "w0", "lambda_l", "predicted_trace", "period_mult",
                                     "x_start", "y_start", "converged", "iterations", "x", "y",
                                     "residual", "trace", "stability"};
  CsvWriter csv(r.file("continue.csv", "predictor", hdr), hdr);
  for (const auto& run : st.runs) {
    const auto& c = run.result;
    csv << run.seed.z0_hat << run.seed.w0 << run.seed.lambda_l << run.seed.predicted_trace
        << run.seed.period_mult << run.start.x << run.start.y << (c.converged ? 1 : 0)
        << c.iterations << c.x << c.y << c.residual << c.trace << to_string(c.stability);
    csv.end();
  }
  r.results = {{"eps", eps},
               {"available_seeds", st.available},
               {"drawn", st.runs.size()},
               {"converged", st.converged},
               {"converged_unstable", st.converged_unstable},
               {"success_fraction", st.success_fraction()}};
}

void cmd_sweep(Run& r) {
  const auto k = constants_for(r);
  auto opt = r.cfg.sweep;
  opt.seed = r.cfg.seed;
  opt.c_inv = r.cfg.c_inv;
  opt.convention = r.cfg.convention;
  const auto res = stable_census_sweep(k, opt);
  {
    const std::vector<std::string> hdr{"index", "inv_log_inv_eps", "eps", "n_seeds", "n_stable"};
    CsvWriter csv(r.file("sweep_samples.csv", "predictor", hdr), hdr);
    for (std::size_t i = 0; i < res.samples.size(); ++i) {
      const auto& s = res.samples[i];
      csv << i << s.inv_log << std::exp(-1.0 / s.inv_log) << s.n_seeds << s.n_stable;
      csv.end();
    }
  }
  const std::vector<std::string> hdr{"n_stable", "count", "fraction"};
  CsvWriter csv(r.file("sweep_histogram.csv", "predictor", hdr), hdr);
  for (const auto& [n, c] : res.histogram) {
    csv << n << c << static_cast<double>(c) / res.samples.size();
    csv.end();
  }
  r.results = {{"samples", res.samples.size()},
               {"zero_fraction", res.zero_fraction()},
               {"some_fraction", 1.0 - res.zero_fraction()}};
}

void cmd_painleve(Run& r) {
  const auto& p = r.cfg.painleve;
  const auto rep = verify_connection_ensemble(p.deltas, p.n_seeds, r.cfg.seed, p.z_lo, p.z_hi,
                                              r.cfg.u_star_hat, p.step_factor);
  {
    const std::vector<std::string> hdr{"seed_index", "z0_hat", "w0",          "delta",
                                       "lambda",     "predicted_branch", "measured_branch",
                                       "rho_measured", "rho_predicted", "action_error",
                                       "phase_error", "jacobian_norm", "jacobian_det"};
    CsvWriter csv(r.file("painleve_experiments.csv", "painleve", hdr), hdr);
    for (std::size_t i = 0; i < rep.runs.size(); ++i) {
      for (const auto& e : rep.runs[i].experiments) {
        csv << i << e.initial.z0_hat << e.initial.w0 << e.delta << e.lambda << e.predicted.eta
            << e.measured_branch << e.measured.rho0_hat << e.predicted.rho0_hat << e.action_error
            << e.phase_error << e.jacobian_norm << e.jacobian_det;
        csv.end();
      }
    }
  }
  {
    const std::vector<std::string> hdr{"delta", "mean_action_error", "mean_phase_error"};
    CsvWriter csv(r.file("painleve_error.csv", "painleve", hdr), hdr);
    for (std::size_t k = 0; k < rep.deltas.size(); ++k) {
      csv << rep.deltas[k] << rep.mean_action_error[k] << rep.mean_phase_error[k];
      csv.end();
    }
  }
  const auto g = jacobian_growth_ensemble(rep.seeds, p.deltas, r.cfg.u_star_hat, p.step_factor);
  {
    const std::vector<std::string> hdr{"delta", "norm", "norm_over_ln2", "det", "interior_norm",
                                       "interior_ratio"};
    CsvWriter csv(r.file("painleve_jacobian.csv", "painleve", hdr), hdr);
    for (std::size_t k = 0; k < g.deltas.size(); ++k) {
      csv << g.deltas[k] << g.norms[k] << g.ratios[k] << g.dets[k] << g.interior[k]
          << g.interior_ratios[k];
      csv.end();
    }
  }
  r.results = {{"action_slope", rep.action_slope},
               {"branch_mismatches", rep.branch_mismatches},
               {"jacobian_tail_non_increasing", g.tail_non_increasing}};
}

void cmd_cover(Run& r) {
  const auto k = constants_for(r);
  auto opt = r.cfg.cover;
  opt.c_inv = r.cfg.c_inv;
  opt.convention = r.cfg.convention;
  const double eps = r.cfg.eps.front();
  const auto rep = interval_cover_analysis(eps, k, r.cfg.cover_mode, opt);
  {
    const std::vector<std::string> hdr{"strip", "window", "z_a", "z_b", "f_a", "f_b", "hits_zero"};
    CsvWriter csv(r.file("cover_intervals.csv", "predictor", hdr), hdr);
    for (const auto& c : rep.intervals) {
      csv << c.strip << c.window << c.z_a << c.z_b << c.f_a << c.f_b << (c.hits_zero ? 1 : 0);
      csv.end();
    }
  }
  if (r.cfg.cover_mode == CoverMode::part3) {
    const std::vector<std::string> hdr{"eps", "stable_count"};
    CsvWriter csv(r.file("cover_part3.csv", "predictor", hdr), hdr);
    for (std::size_t i = 0; i < rep.eps_grid.size(); ++i) {
      csv << rep.eps_grid[i] << rep.stable_counts[i];
      csv.end();
    }
  } else {
    const std::vector<std::string> hdr{"index", "gap", "gap_theory"};
    CsvWriter csv(r.file("cover_gaps.csv", "predictor", hdr), hdr);
    for (std::size_t i = 0; i < rep.gaps.size(); ++i) {
      csv << i << rep.gaps[i] << rep.gap_theory[i];
      csv.end();
    }
  }
  if (r.cfg.cover_mode == CoverMode::part4) {
    const std::vector<std::string> hdr{"pair", "separation", "width"};
    CsvWriter csv(r.file("cover_overlap.csv", "predictor", hdr), hdr);
    for (std::size_t i = 0; i < rep.separations.size(); ++i) {
      csv << i << rep.separations[i] << rep.widths[i];
      csv.end();
    }
  }
  r.results = {{"mode", to_string(r.cfg.cover_mode)},
               {"intervals", rep.intervals.size()},
               {"circle_coverage", rep.circle_coverage},
               {"upper_estimate", rep.upper_estimate},
               {"count_changes", rep.count_changes},
               {"drift_rate", rep.drift_rate},
               {"consecutive_overlap", rep.consecutive_overlap}};
}

void cmd_constants(Run& r) {
  const auto k = constants_for(r);
  const std::vector<std::string> hdr{"name", "value"};
  CsvWriter csv(r.file("constants.csv", "asymptotic_maps", hdr), hdr);
  const std::vector<std::pair<std::string, double>> rows{
      {"e1", k.e1}, {"e2", k.e2}, {"e3", k.e3}, {"e4", k.e4}, {"e4_raw", k.e4_raw},
      {"C2", k.C2}, {"C4", k.C4}};
  for (const auto& [n, v] : rows) {
    csv << n << v;
    csv.end();
    r.results[n] = v;
  }
  r.results["quad_tol"] = k.quad_tol;
  r.results["extrapolation"] = {
      {"u_star", k.u_star_table}, {"C2", k.C2_table}, {"C4", k.C4_table}};
}

int error_exit(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic orbits near a bifurcating slow manifold"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file, model_name, model_file, out_dir, convention, census_file, cover_mode;
  std::vector<double> eps;
  double h = 0.0;
  long long seed = -1;
  int n_values = 0;
  app.add_option("-c,--config", config_file, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--model", model_name, "builtin model: toy or perturbed");
  app.add_option("--model-file", model_file, "JSON coefficient tables")->check(CLI::ExistingFile);
  app.add_option("--eps", eps, "eps value(s)");
  app.add_option("-o,--out", out_dir, "output directory");
  app.add_option("--convention", convention, "phase convention: corrected or paper");
  app.add_option("--step", h, "integrator step h");
  app.add_option("--seed", seed, "RNG seed");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"validate", "check assumptions on the model"},
      {"integrate", "export one trajectory"},
      {"census", "periodic orbit census on the symmetric section"},
      {"fit", "fit a ln^2(1/eps) + b to census counts"},
      {"predict", "analytic seeds and traces"},
      {"continue", "Newton-refine analytic seeds on the return map"},
      {"sweep", "stable census over random ln^{-1}(1/eps)"},
      {"verify-painleve", "truncated crossing experiments"},
      {"cover", "interval cover analyses"},
      {"constants", "model constants e1..e4"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) subs[name] = app.add_subcommand(name, help);
  subs["fit"]->add_option("--census", census_file, "census CSV to fit instead of rerunning")
      ->check(CLI::ExistingFile);
  subs["sweep"]->add_option("--n", n_values, "number of samples");
  subs["cover"]->add_option("--mode", cover_mode, "part2, part3 or part4");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return error_exit("UsageError", e.what(), 2);
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  Run r;
  const auto started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (!config_file.empty()) {
      r.cfg = load_config_file(config_file);
      r.config_dir = fs::path(config_file).parent_path();
    }
    r.cfg.command = command;
    if (!model_name.empty()) r.cfg.model = {{"builtin", model_name}};
    if (!model_file.empty()) r.cfg.model = {{"table_file", fs::absolute(model_file).string()}};
    if (!eps.empty()) r.cfg.eps = eps;
    if (!out_dir.empty()) r.cfg.output_dir = out_dir;
    if (!convention.empty()) r.cfg.convention = parse_convention(convention);
    if (h > 0.0) r.cfg.integrator.h = h;
    if (seed >= 0) r.cfg.seed = static_cast<std::uint64_t>(seed);
    if (n_values > 0) r.cfg.sweep.n_values = n_values;
    if (!cover_mode.empty()) r.cfg.cover_mode = parse_cover_mode(cover_mode);
    validate(r.cfg);
    r.model = load_model(r.cfg.model, r.config_dir);
    r.out = r.cfg.output_dir;
    fs::create_directories(r.out);

    if (command == "validate") cmd_validate(r);
    else if (command == "integrate") cmd_integrate(r);
    else if (command == "census") cmd_census(r);
    else if (command == "fit") cmd_fit(r, census_file);
    else if (command == "predict") cmd_predict(r);
    else if (command == "continue") cmd_continue(r);
    else if (command == "sweep") cmd_sweep(r);
    else if (command == "verify-painleve") cmd_painleve(r);
    else if (command == "cover") cmd_cover(r);
    else if (command == "constants") cmd_constants(r);

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json meta{{"command", command},
              {"config", to_json(r.cfg)},
              {"model_name", r.model.name},
              {"versions", versions()},
              {"threads", thread_count()},
              {"thread_env", "SLOWFAST_THREADS"},
              {"started_utc", started},
              {"runtime_seconds", secs},
              {"outputs", r.files},
              {"csv_schemas", r.columns},
              {"results", r.results}};
    write_json(r.out / (command + ".json"), meta);
    std::cout << r.results.dump(2) << '\n';
    if (command == "validate" && !r.results.value("all_passed", false)) return 4;
    return 0;
  } catch (const ConfigError& e) {
    return error_exit("ConfigError", e.what(), 2);
  } catch (const DomainError& e) {
    return error_exit("DomainError", e.what(), 3);
  } catch (const DegenerateFit& e) {
    return error_exit("DegenerateFit", e.what(), 3);
  } catch (const std::exception& e) {
    return error_exit("RuntimeError", e.what(), 1);
  }
}
