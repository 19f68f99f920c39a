#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbd/cli/config.hpp"
#include "sbd/conditions.hpp"
#include "sbd/hierarchy.hpp"
#include "sbd/simulator.hpp"
#include "sbd/vlasov.hpp"

#ifndef SBD_VERSION
#define SBD_VERSION "0.1.0+unknown"
#endif

namespace sbd::cli {

enum ExitCode : int { kOk = 0, kFailed = 1, kUsage = 2 };

struct Overrides {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

/// Shortest round-trip decimal form.
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw ConfigError("cannot write " + path.string());
    row_strings(header);
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << num(values[i]);
    out_ << '\n';
  }

private:
  void row_strings(const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? "," : "") << v[i];
    out_ << '\n';
  }
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// Node coordinates as CSV columns.
inline std::vector<std::string> coord_header(int dim, const std::string& prefix = "") {
  if (dim == 1) return {prefix + "x"};
  return {prefix + "x", prefix + "y"};
}

inline void push_coords(std::vector<double>& row, const Point& p, int dim) {
  row.push_back(p[0]);
  if (dim == 2) row.push_back(p[1]);
}

/// Offset as a signed minimum-image displacement.
inline Point signed_offset(const Grid& g, std::size_t i) {
  Point p = g.node(i);
  return {g.torus().min_image(p[0]), g.dim() == 2 ? g.torus().min_image(p[1]) : 0.0};
}

inline json report_json(const conditions::ConditionReport& r) {
  json j;
  j["model"] = r.model;
  j["C"] = r.C;
  j["a1"] = r.a1;
  j["a2"] = r.a2;
  j["a1_plus_a2_over_C"] = r.sum();
  j["bound_3_2"] = r.bound_3_2;
  j["bound_2"] = r.bound_2;
  j["nu"] = r.nu;
  j["nu_window"] = r.nu_window;
  j["alpha_window"] = r.alpha_window ? json::array({r.alpha_window->first, r.alpha_window->second}) : json(nullptr);
  j["contraction_q"] = r.contraction_q;
  j["chain_constants"] = r.chain_constants;
  j["growth"] = {{"A", r.growth.A}, {"N", r.growth.N}, {"nu", r.growth.nu}};
  j["best_C"] = r.best_C;
  j["best_a1_plus_a2_over_C"] = r.best_sum;
  if (r.delta) {
    j["delta"] = std::isinf(*r.delta) ? json("inf") : json(*r.delta);
    j["delta_formula"] = r.delta_formula;
  }
  if (r.worst_node) {
    j["worst_node"] = json::array({(*r.worst_node)[0], (*r.worst_node)[1]});
    j["worst_margin"] = r.worst_margin;
  }
  json ineq = json::array();
  for (const auto& q : r.inequalities)
    ineq.push_back({{"name", q.name},
                    {"expression", q.expression},
                    {"lhs", q.lhs},
                    {"rhs", q.rhs},
                    {"strict", q.strict},
                    {"holds", q.holds}});
  j["inequalities"] = ineq;
  j["failed"] = r.failed();
  return j;
}

/// Shared state of one command invocation.
struct Context {
  RunConfig cfg;
  std::optional<models::AnyModel> model;
  std::filesystem::path out;
  std::string command;
  std::chrono::steady_clock::time_point start;
  std::ostream* log;

  void write_manifest(const json& results) const {
    json m;
    m["command"] = command;
    m["version"] = SBD_VERSION;
    m["config"] = cfg.source;
    m["results"] = results;
    m["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    m["finished_at"] = buf;
    write_json(out / "manifest.json", m);
  }
};

inline KernelScaling scaling_of(double eps) { return eps == 1.0 ? KernelScaling::unscaled() : KernelScaling::scaled(eps); }

inline std::vector<std::vector<Point>> verification_samples(const Grid& g, std::size_t count, std::uint64_t seed) {
  sim::Rng rng(seed);
  std::vector<std::vector<Point>> out;
  for (std::size_t s = 0; s < count; ++s) {
    std::size_t size = 1 + s % 4;
    std::vector<std::size_t> idx;
    while (idx.size() < std::min(size, g.size())) {
      std::size_t i = rng() % g.size();
      if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
    }
    std::vector<Point> xi;
    for (auto i : idx) xi.push_back(g.node(i));
    out.push_back(xi);
  }
  return out;
}

inline int cmd_check(Context& ctx) {
  auto rep = conditions::check_conditions(*ctx.model, ctx.cfg.weights.C);
  json j = report_json(rep);
  int code = rep.bound_3_2 ? kOk : kFailed;
  if (ctx.cfg.run.verify_samples > 0) {
    auto samples = verification_samples(models::grid_of(*ctx.model), ctx.cfg.run.verify_samples, ctx.cfg.run.seed);
    try {
      auto v = conditions::verify_kernel_bounds(*ctx.model, rep, samples, ctx.cfg.weights.n_max);
      j["verification"] = {{"a1_hat", v.a1_hat}, {"a2_hat", v.a2_hat}, {"passed", true}};
    } catch (const ValidationError& e) {
      j["verification"] = {{"passed", false}, {"message", e.what()}};
      *ctx.log << "verification failed: " << e.what() << '\n';
      code = kFailed;
    }
  }
  write_json(ctx.out / "report.json", j);
  std::cout << j.dump(2) << '\n';
  for (const auto& f : rep.failed()) *ctx.log << "condition failed: " << f << '\n';
  ctx.write_manifest({{"bound_3_2", rep.bound_3_2}, {"exit_code", code}});
  return code;
}

inline int cmd_simulate(Context& ctx) {
  const RunSpec& r = ctx.cfg.run;
  sim::EnsembleConfig ec;
  ec.replicas = r.replicas;
  ec.seed = r.seed;
  ec.T = r.T;
  ec.eps = r.eps;
  ec.initial = r.initial;
  ec.checkpoints = r.checkpoints;
  ec.burn_in = r.burn_in;
  ec.sample_dt = r.sample_dt;
  ec.threads = r.threads;
  ec.population_cap = r.population_cap;
  auto res = sim::run_ensemble(*ctx.model, ec);
  const Grid& g = models::grid_of(*ctx.model);
  const int dim = g.dim();
  const auto& c = res.correlations;
  {
    auto header = coord_header(dim, "bin_center_");
    header.insert(header.end(), {"estimate", "std_error"});
    CsvWriter w(ctx.out / "k1.csv", header);
    const double h = g.spacing();
    for (std::size_t i = 0; i < g.size(); ++i) {
      Point p = g.node(i);
      std::vector<double> row;
      push_coords(row, {p[0] + 0.5 * h, p[1] + (dim == 2 ? 0.5 * h : 0.0)}, dim);
      row.insert(row.end(), {c.k1[i], c.k1_se[i]});
      w.row(row);
    }
  }
  {
    CsvWriter w(ctx.out / "k2.csv", {"bin_center", "estimate", "std_error"});
    for (std::size_t b = 0; b < c.k2.size(); ++b) w.row({c.k2_centers[b], c.k2[b], c.k2_se[b]});
  }
  if (!res.trajectory.empty()) {
    CsvWriter w(ctx.out / "trajectory.csv",
                {"time", "mean_population", "population_se", "mean_density", "density_se"});
    for (const auto& t : res.trajectory)
      w.row({t.time, t.mean_population, t.population_se, t.mean_density, t.density_se});
  }
  json ev = json::array();
  for (const auto& s : res.replicas)
    ev.push_back({{"seed", s.seed},
                  {"events", s.events},
                  {"births", s.births},
                  {"deaths", s.deaths},
                  {"rejected", s.rejected},
                  {"final_population", s.final_population},
                  {"absorbed", s.absorbed}});
  write_json(ctx.out / "events.json", ev);
  ctx.write_manifest({{"density", c.density}, {"density_se", c.density_se}, {"sample_count", c.sample_count}});
  return kOk;
}

inline bool homogeneous_run(const RunConfig& c) { return c.run.homogeneous.value_or(c.run.rho0.amplitude == 0.0); }

inline void write_correlations(const std::filesystem::path& dir, const std::vector<std::pair<double, const hierarchy::CorrelationVector*>>& snaps) {
  if (snaps.empty()) return;
  const auto& first = *snaps.front().second;
  const Grid& g = first.grid;
  const int dim = g.dim();
  {
    auto header = std::vector<std::string>{"time"};
    auto ch = coord_header(dim);
    header.insert(header.end(), ch.begin(), ch.end());
    header.push_back("k1");
    CsvWriter w(dir / "k1.csv", header);
    for (const auto& [t, k] : snaps)
      for (std::size_t i = 0; i < g.size(); ++i) {
        std::vector<double> row{t};
        push_coords(row, g.node(i), dim);
        row.push_back(k->k1[i]);
        w.row(row);
      }
  }
  if (first.n_max < 2) return;
  std::vector<std::string> header{"time"};
  if (first.homogeneous) {
    auto ch = coord_header(dim, "d");
    header.insert(header.end(), ch.begin(), ch.end());
  } else {
    for (const char* p : {"1", "2"}) {
      auto ch = coord_header(dim);
      for (auto& s : ch) header.push_back(s + p);
    }
  }
  header.push_back("k2");
  CsvWriter w(dir / "k2.csv", header);
  for (const auto& [t, k] : snaps) {
    if (k->homogeneous) {
      for (std::size_t r = 0; r < g.size(); ++r) {
        std::vector<double> row{t};
        push_coords(row, signed_offset(g, r), dim);
        row.push_back(k->k2[r]);
        w.row(row);
      }
    } else {
      for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) {
          std::vector<double> row{t};
          push_coords(row, g.node(i), dim);
          push_coords(row, g.node(j), dim);
          row.push_back(k->pair(i, j));
          w.row(row);
        }
    }
  }
}

inline hierarchy::HierarchyConfig hierarchy_config(const RunConfig& c) {
  return {c.weights.zeta_max, c.weights.closure, scaling_of(c.run.eps)};
}

inline int cmd_evolve(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  auto rho0 = initial_density(c);
  auto k0 = hierarchy::CorrelationVector::coherent(rho0, c.weights.C, c.weights.N_max, homogeneous_run(c));
  auto res = hierarchy::evolve(*ctx.model, hierarchy_config(c), k0, c.run.T, c.run.dt, c.run.snapshot_times);
  std::vector<std::pair<double, const hierarchy::CorrelationVector*>> snaps;
  json norms = json::array();
  for (const auto& s : res.snapshots) {
    snaps.emplace_back(s.time, &s.k);
    norms.push_back({{"time", s.time}, {"truncated_norm", s.norm}});
  }
  write_correlations(ctx.out, snaps);
  for (const auto& w : res.warnings) *ctx.log << "warning: " << w << '\n';
  ctx.write_manifest({{"norms", norms}, {"warnings", res.warnings}, {"stability_bound", res.stability_bound}});
  return kOk;
}

inline int cmd_stationary(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  auto res = hierarchy::stationary_solve(*ctx.model, hierarchy_config(c), c.weights.C, c.weights.N_max,
                                         c.run.homogeneous.value_or(true), c.run.tol, c.run.max_iter);
  write_correlations(ctx.out, {{0.0, &res.k_inv}});
  ctx.write_manifest({{"contraction_q", res.q},
                      {"iterations", res.iterations},
                      {"certificate", res.certificate},
                      {"error_bound", res.error_bound},
                      {"residual", res.residual},
                      {"truncated_norm", res.k_inv.ruelle_norm()}});
  return kOk;
}

inline int cmd_vlasov(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  vlasov::VlasovOperator op(*ctx.model);
  auto rep = conditions::check_at(*ctx.model, c.weights.C);
  vlasov::IntegrateOptions opt;
  if (rep.alpha_window) opt.ball_radius = rep.alpha_window->second * c.weights.C;
  auto rho0 = initial_density(c);
  std::vector<std::string> pre;
  if (opt.ball_radius && rho0.max() > *opt.ball_radius) pre.push_back("initial density lies outside the alpha*C ball");
  if (!rep.alpha_window) pre.push_back("no admissible alpha window at this C; ball membership not monitored");
  auto tr = vlasov::integrate(op, rho0, c.run.T, c.run.dt, c.run.snapshot_times, opt);
  const Grid& g = rho0.grid();
  auto header = std::vector<std::string>{"time"};
  auto ch = coord_header(g.dim());
  header.insert(header.end(), ch.begin(), ch.end());
  header.push_back("rho");
  CsvWriter w(ctx.out / "rho.csv", header);
  for (const auto& s : tr.snapshots)
    for (std::size_t i = 0; i < g.size(); ++i) {
      std::vector<double> row{s.time};
      push_coords(row, g.node(i), g.dim());
      row.push_back(s.rho[i]);
      w.row(row);
    }
  pre.insert(pre.end(), tr.warnings.begin(), tr.warnings.end());
  for (const auto& s : pre) *ctx.log << "warning: " << s << '\n';
  ctx.write_manifest({{"warnings", pre},
                      {"max_sup", tr.max_sup},
                      {"clipped_mass", tr.clipped_mass},
                      {"left_ball", tr.left_ball},
                      {"stability_bound", tr.stability_bound}});
  return kOk;
}

inline int cmd_scale_compare(Context& ctx) {
  const RunConfig& c = ctx.cfg;
  vlasov::ScalingConfig sc;
  sc.epsilons = c.run.epsilons;
  sc.include_limit = c.run.include_limit;
  sc.C = c.weights.C;
  sc.zeta_max = c.weights.zeta_max;
  sc.closure = c.weights.closure;
  sc.n_max = c.weights.N_max;
  sc.T = c.run.T;
  sc.dt = c.run.dt;
  sc.snapshot_times = c.run.snapshot_times;
  auto rows = vlasov::scaling_compare(*ctx.model, initial_density(c), sc);
  CsvWriter w(ctx.out / "errors.csv", {"eps", "limit", "time", "error", "k1_error", "k2_error"});
  for (const auto& r : rows) w.row({r.eps, r.limit ? 1.0 : 0.0, r.time, r.error, r.k1_error, r.k2_error});
  // Monotonicity of the final-time error along the eps list.
  double last_t = rows.empty() ? 0.0 : rows.back().time;
  std::vector<double> finals;
  for (const auto& r : rows)
    if (!r.limit && r.time == last_t) finals.push_back(r.error);
  bool monotone = true;
  for (std::size_t i = 1; i < finals.size(); ++i) monotone = monotone && finals[i] < finals[i - 1];
  ctx.write_manifest({{"final_errors", finals}, {"strictly_decreasing", monotone}});
  return kOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cerr) {
  CLI::App app{"Spatial birth-and-death dynamics: conditions, simulation, correlation hierarchy, mean-field limit"};
  app.set_version_flag("--version", std::string(SBD_VERSION));
  Overrides ov;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  app.add_option("--config", ov.config_path, "JSON run configuration")->required();
  app.add_option("--out", ov.out_dir, "Output directory (overrides output.directory)");
  auto* seed_opt = app.add_option("--seed", seed, "Base seed (overrides run.seed)");
  auto* threads_opt = app.add_option("--threads", threads, "Worker thread cap (overrides run.threads)");
  app.require_subcommand(1);
  auto* check = app.add_subcommand("check", "Evaluate the sufficient conditions and constants");
  auto* simulate = app.add_subcommand("simulate", "Run the stochastic simulator");
  auto* hier = app.add_subcommand("hierarchy", "Truncated correlation hierarchy");
  auto* evolve = hier->add_subcommand("evolve", "Evolve correlation functions in time");
  auto* stationary = hier->add_subcommand("stationary", "Solve the Kirkwood-Salzburg equation");
  hier->require_subcommand(1);
  auto* vl = app.add_subcommand("vlasov", "Integrate the mean-field equation");
  auto* scale = app.add_subcommand("scale-compare", "Compare scaled hierarchies with the mean-field limit");
  for (auto* s : {check, simulate, hier, evolve, stationary, vl, scale}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::ostringstream out, err;
    app.exit(e, out, err);
    log << out.str() << err.str();
    return kUsage;
  }
  if (*seed_opt) ov.seed = seed;
  if (*threads_opt) ov.threads = threads;

  Context ctx;
  ctx.log = &log;
  ctx.start = std::chrono::steady_clock::now();
  try {
    ctx.cfg = load_config(ov.config_path);
    if (ov.seed) {
      ctx.cfg.run.seed = *ov.seed;
      ctx.cfg.source["run"]["seed"] = *ov.seed;
    }
    if (ov.threads) {
      ctx.cfg.run.threads = std::max<std::size_t>(1, *ov.threads);
      ctx.cfg.source["run"]["threads"] = ctx.cfg.run.threads;
    }
    if (!ov.out_dir.empty()) {
      ctx.cfg.output.directory = ov.out_dir;
      ctx.cfg.source["output"]["directory"] = ov.out_dir;
    }
    ctx.model = build_model(ctx.cfg);
    ctx.out = ctx.cfg.output.directory;
    std::filesystem::create_directories(ctx.out);
  } catch (const Error& e) {
    log << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    log << "configuration error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*check) {
      ctx.command = "check";
      return cmd_check(ctx);
    }
    if (*simulate) {
      ctx.command = "simulate";
      return cmd_simulate(ctx);
    }
    if (*evolve) {
      ctx.command = "hierarchy evolve";
      return cmd_evolve(ctx);
    }
    if (*stationary) {
      ctx.command = "hierarchy stationary";
      return cmd_stationary(ctx);
    }
    if (*vl) {
      ctx.command = "vlasov";
      return cmd_vlasov(ctx);
    }
    ctx.command = "scale-compare";
    return cmd_scale_compare(ctx);
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const TruncationError& e) {
    log << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    log << "run failed: " << e.what() << '\n';
    return kFailed;
  }
}

}  // namespace sbd::cli
