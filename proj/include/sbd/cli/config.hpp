#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbd/error.hpp"
#include "sbd/hierarchy.hpp"
#include "sbd/kernels.hpp"
#include "sbd/models.hpp"
#include "sbd/simulator.hpp"

namespace sbd::cli {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
T get_or(const json& j, const std::string& where, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

template <class T>
T require(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in " + where);
  return get_or<T>(j, where, key, T{});
}

struct KernelSpec {
  KernelProfile profile;

  static KernelSpec parse(const json& j, const std::string& where) {
    check_keys(j, where, {"profile", "amplitude", "width", "cutoff"});
    KernelSpec k;
    try {
      k.profile.kind = KernelProfile::parse(get_or<std::string>(j, where, "profile", "gaussian"));
    } catch (const ModelViolation& e) {
      throw ConfigError(where + ": " + e.what());
    }
    k.profile.amplitude = get_or<double>(j, where, "amplitude", 1.0);
    k.profile.width = get_or<double>(j, where, "width", 1.0);
    k.profile.cutoff = get_or<double>(j, where, "cutoff", 0.0);
    if (!(k.profile.width > 0.0)) throw ConfigError(where + ".width must be positive");
    return k;
  }
};

struct ModelSpec {
  std::string name = "glauber";
  double s = 0.5, z = 1.0;
  KernelSpec phi;
  double m = 1.0, kappa_minus = 0.0, kappa_plus = 0.0, kappa = 0.0;
  KernelSpec a_minus, a_plus;
};

struct SpaceSpec {
  int d = 1;
  double L = 10.0;
  std::size_t M = 64;
};

struct WeightsSpec {
  double C = 2.0;
  std::size_t n_max = 12;
  std::size_t zeta_max = 2;
  int N_max = 2;
  hierarchy::Closure closure = hierarchy::Closure::poisson;
};

/// Initial density for the mean-field and hierarchy runs: base + amplitude * cos(2 pi x / L).
struct DensitySpec {
  double base = 1.0;
  double amplitude = 0.0;
};

struct RunSpec {
  double T = 1.0;
  double dt = 0.01;
  std::vector<double> snapshot_times;
  std::size_t replicas = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  sim::InitialCondition initial;
  std::vector<double> checkpoints;
  double burn_in = 0.0;
  double sample_dt = 0.0;
  double eps = 1.0;
  std::size_t population_cap = sim::kDefaultPopulationCap;
  std::vector<double> epsilons{1.0, 0.3, 0.1, 0.03};
  bool include_limit = true;
  double tol = 1e-8;
  std::size_t max_iter = 100000;
  std::optional<bool> homogeneous;
  DensitySpec rho0;
  std::size_t verify_samples = 0;
};

struct OutputSpec {
  std::string directory = "out";
};

struct RunConfig {
  ModelSpec model;
  SpaceSpec space;
  WeightsSpec weights;
  RunSpec run;
  OutputSpec output;
  json source;
};

inline ModelSpec parse_model(const json& j) {
  ModelSpec m;
  m.name = require<std::string>(j, "model", "name");
  if (m.name == "glauber") {
    check_keys(j, "model", {"name", "s", "z", "phi"});
    m.s = require<double>(j, "model", "s");
    m.z = require<double>(j, "model", "z");
    m.phi = KernelSpec::parse(j.contains("phi") ? j.at("phi") : json::object(), "model.phi");
  } else if (m.name == "bdlp" || m.name == "bdlp_modified") {
    if (m.name == "bdlp")
      check_keys(j, "model", {"name", "m", "kappa_minus", "kappa_plus", "a_minus", "a_plus"});
    else
      check_keys(j, "model", {"name", "m", "kappa_minus", "kappa_plus", "kappa", "a_minus", "a_plus"});
    m.m = require<double>(j, "model", "m");
    m.kappa_minus = get_or<double>(j, "model", "kappa_minus", 0.0);
    m.kappa_plus = get_or<double>(j, "model", "kappa_plus", 0.0);
    m.kappa = get_or<double>(j, "model", "kappa", 0.0);
    m.a_minus = KernelSpec::parse(j.contains("a_minus") ? j.at("a_minus") : json::object(), "model.a_minus");
    m.a_plus = KernelSpec::parse(j.contains("a_plus") ? j.at("a_plus") : json::object(), "model.a_plus");
  } else {
    throw ConfigError("model.name must be one of glauber, bdlp, bdlp_modified");
  }
  return m;
}

inline RunConfig parse_config(const json& j) {
  check_keys(j, "config", {"model", "space", "weights", "run", "output"});
  RunConfig c;
  c.source = j;
  if (!j.contains("model")) throw ConfigError("missing model block");
  c.model = parse_model(j.at("model"));

  const json space = j.value("space", json::object());
  check_keys(space, "space", {"d", "L", "M"});
  c.space.d = get_or<int>(space, "space", "d", 1);
  c.space.L = get_or<double>(space, "space", "L", 10.0);
  c.space.M = get_or<std::size_t>(space, "space", "M", 64);
  if (c.space.d != 1 && c.space.d != 2) throw ConfigError("space.d must be 1 or 2");
  if (!(c.space.L > 0.0)) throw ConfigError("space.L must be positive");
  if (c.space.M < 2) throw ConfigError("space.M must be at least 2");

  const json w = j.value("weights", json::object());
  check_keys(w, "weights", {"C", "n_max", "zeta_max", "N_max", "closure"});
  c.weights.C = get_or<double>(w, "weights", "C", 2.0);
  c.weights.n_max = get_or<std::size_t>(w, "weights", "n_max", 12);
  c.weights.zeta_max = get_or<std::size_t>(w, "weights", "zeta_max", 2);
  c.weights.N_max = get_or<int>(w, "weights", "N_max", 2);
  c.weights.closure = hierarchy::parse_closure(get_or<std::string>(w, "weights", "closure", "poisson"));
  if (!(c.weights.C > 1.0)) throw ConfigError("weights.C must exceed 1");
  if (c.weights.N_max != 1 && c.weights.N_max != 2) throw ConfigError("weights.N_max must be 1 or 2");

  const json r = j.value("run", json::object());
  check_keys(r, "run",
             {"T", "dt", "snapshot_times", "replicas", "seed", "threads", "initial", "checkpoints", "burn_in",
              "sample_dt", "eps", "population_cap", "epsilons", "include_limit", "tol", "max_iter", "homogeneous",
              "rho0", "verify_samples"});
  RunSpec& run = c.run;
  run.T = get_or<double>(r, "run", "T", 1.0);
  run.dt = get_or<double>(r, "run", "dt", 0.01);
  run.snapshot_times = get_or<std::vector<double>>(r, "run", "snapshot_times", {});
  run.replicas = static_cast<std::size_t>(get_or<long long>(r, "run", "replicas", 1));
  if (get_or<long long>(r, "run", "replicas", 1) < 1) throw ConfigError("run.replicas must be at least 1");
  run.seed = get_or<std::uint64_t>(r, "run", "seed", 0);
  run.threads = get_or<std::size_t>(r, "run", "threads", 1);
  run.checkpoints = get_or<std::vector<double>>(r, "run", "checkpoints", {});
  run.burn_in = get_or<double>(r, "run", "burn_in", 0.0);
  run.sample_dt = get_or<double>(r, "run", "sample_dt", 0.0);
  run.eps = get_or<double>(r, "run", "eps", 1.0);
  run.population_cap = get_or<std::size_t>(r, "run", "population_cap", sim::kDefaultPopulationCap);
  run.epsilons = get_or<std::vector<double>>(r, "run", "epsilons", {1.0, 0.3, 0.1, 0.03});
  run.include_limit = get_or<bool>(r, "run", "include_limit", true);
  run.tol = get_or<double>(r, "run", "tol", 1e-8);
  run.max_iter = get_or<std::size_t>(r, "run", "max_iter", 100000);
  if (r.contains("homogeneous")) run.homogeneous = get_or<bool>(r, "run", "homogeneous", false);
  run.verify_samples = get_or<std::size_t>(r, "run", "verify_samples", 0);
  if (r.contains("initial")) {
    const json& ic = r.at("initial");
    check_keys(ic, "run.initial", {"kind", "intensity", "count"});
    std::string kind = get_or<std::string>(ic, "run.initial", "kind", "poisson");
    if (kind == "poisson") run.initial.kind = sim::InitialCondition::Kind::poisson;
    else if (kind == "fixed") run.initial.kind = sim::InitialCondition::Kind::fixed;
    else if (kind == "empty") run.initial.kind = sim::InitialCondition::Kind::empty;
    else throw ConfigError("run.initial.kind must be poisson, fixed or empty");
    run.initial.intensity = get_or<double>(ic, "run.initial", "intensity", 1.0);
    run.initial.count = get_or<std::size_t>(ic, "run.initial", "count", 0);
    if (run.initial.intensity < 0.0) throw ConfigError("run.initial.intensity must be nonnegative");
  }
  if (r.contains("rho0")) {
    const json& rj = r.at("rho0");
    check_keys(rj, "run.rho0", {"base", "amplitude"});
    run.rho0.base = get_or<double>(rj, "run.rho0", "base", 1.0);
    run.rho0.amplitude = get_or<double>(rj, "run.rho0", "amplitude", 0.0);
    if (run.rho0.base - std::abs(run.rho0.amplitude) < 0.0) throw ConfigError("run.rho0 must be nonnegative");
  }
  if (!(run.T >= 0.0)) throw ConfigError("run.T must be nonnegative");
  if (!(run.dt > 0.0)) throw ConfigError("run.dt must be positive");
  if (!(run.tol > 0.0)) throw ConfigError("run.tol must be positive");
  if (!(run.eps > 0.0 && run.eps <= 1.0)) throw ConfigError("run.eps must lie in (0,1]");
  for (double e : run.epsilons)
    if (!(e > 0.0 && e <= 1.0)) throw ConfigError("run.epsilons must lie in (0,1]");
  for (double t : run.snapshot_times)
    if (t < 0.0 || t > run.T) throw ConfigError("run.snapshot_times must lie in [0, T]");
  for (double t : run.checkpoints)
    if (t < 0.0 || t > run.T) throw ConfigError("run.checkpoints must lie in [0, T]");

  const json o = j.value("output", json::object());
  check_keys(o, "output", {"directory"});
  c.output.directory = get_or<std::string>(o, "output", "directory", "out");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

inline Grid make_grid(const SpaceSpec& s) { return Grid(Torus(s.d, s.L), s.M); }

/// Builds and validates the model; any invariant violation becomes a configuration error.
inline models::AnyModel build_model(const RunConfig& c) {
  try {
    Grid g = make_grid(c.space);
    const ModelSpec& m = c.model;
    if (m.name == "glauber") return models::GlauberModel(m.s, m.z, sample_radial(g, m.phi.profile));
    models::BdlpModel::Params p{m.m, m.kappa_minus, m.kappa_plus, m.kappa, m.name == "bdlp_modified"};
    return models::BdlpModel(p, sample_normalized(g, m.a_minus.profile), sample_normalized(g, m.a_plus.profile));
  } catch (const ModelViolation& e) {
    throw ConfigError(std::string("invalid model: ") + e.what());
  }
}

inline GridFunction initial_density(const RunConfig& c) {
  Grid g = make_grid(c.space);
  const double L = c.space.L, b = c.run.rho0.base, a = c.run.rho0.amplitude;
  return GridFunction::sample(g, [&](const Point& p) { return b + a * std::cos(2.0 * std::numbers::pi * p[0] / L); });
}

}  // namespace sbd::cli
