#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "sbd/combinatorics.hpp"
#include "sbd/error.hpp"
#include "sbd/models.hpp"

namespace sbd::sim {

using combinatorics::FiniteConfiguration;
using models::AnyModel;
using Rng = std::mt19937_64;

inline constexpr std::size_t kDefaultPopulationCap = 100000;

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
inline double exponential(Rng& rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

/// Neumaier compensated accumulator.
class CompensatedSum {
public:
  void add(double v) {
    double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0, comp_ = 0.0;
};

/// Jump rates of a model at scale eps, in the form used by the simulator.
class Dynamics {
public:
  Dynamics(const AnyModel& model, double eps = 1.0) : eps_(eps) {
    models::require_eps(eps);
    grid_ = models::grid_of(model);
    if (const auto* g = std::get_if<models::GlauberModel>(&model)) {
      glauber_ = true;
      s_ = g->s();
      z_ = g->z();
      death_field_ = g->phi();
      birth_field_ = g->phi();
    } else {
      const auto& b = std::get<models::BdlpModel>(model);
      m_ = b.m();
      kminus_ = b.kappa_minus();
      kplus_ = b.kappa_plus();
      kappa_ = b.kappa();
      death_field_ = b.a_minus();
      birth_field_ = b.a_plus();
      cumulative_.resize(birth_field_.size());
      double acc = 0.0;
      for (std::size_t i = 0; i < birth_field_.size(); ++i) {
        acc += birth_field_[i];
        cumulative_[i] = acc;
      }
    }
  }

  const Grid& grid() const { return grid_; }
  const Torus& torus() const { return grid_.torus(); }
  double eps() const { return eps_; }
  const GridFunction& death_field() const { return death_field_; }
  const GridFunction& birth_field() const { return birth_field_; }

  double death_rate(double u) const {
    return glauber_ ? std::exp(eps_ * s_ * u) : m_ + eps_ * kminus_ * u;
  }

  /// Generator birth density eps^{-1} b_eps(x, gamma) from the birth field at x.
  double birth_density(double ub) const {
    return glauber_ ? z_ / eps_ * std::exp(eps_ * (s_ - 1.0) * ub) : kappa_ / eps_ + kplus_ * ub;
  }

  /// Total mass of the dominating birth measure.
  double birth_bound(std::size_t n) const {
    const double vol = torus().volume();
    return glauber_ ? z_ / eps_ * vol : kappa_ / eps_ * vol + kplus_ * static_cast<double>(n);
  }

  /// Draws from the dominating birth measure; returns the location and its dominating density.
  std::pair<Point, double> propose(const FiniteConfiguration& gamma, Rng& rng) const {
    const Torus& t = torus();
    auto uniform_point = [&]() {
      Point p{uniform01(rng) * t.length(), 0.0};
      if (t.dim() == 2) p[1] = uniform01(rng) * t.length();
      return p;
    };
    if (glauber_) return {uniform_point(), z_ / eps_};
    const double uni = kappa_ / eps_ * t.volume();
    const double total = birth_bound(gamma.size());
    Point x;
    if (uniform01(rng) * total < uni) {
      x = uniform_point();
    } else {
      const Point& parent = gamma[std::min(gamma.size() - 1, static_cast<std::size_t>(uniform01(rng) *
                                                                                       static_cast<double>(gamma.size())))];
      double r = uniform01(rng) * cumulative_.back();
      auto k = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), r) - cumulative_.begin());
      k = std::min(k, cumulative_.size() - 1);
      Point off = grid_.node(k);
      const double h = grid_.spacing();
      off[0] += (uniform01(rng) - uniform01(rng)) * h;
      if (t.dim() == 2) off[1] += (uniform01(rng) - uniform01(rng)) * h;
      x = t.wrap(Point{parent[0] + off[0], parent[1] + off[1]});
    }
    double dom = kappa_ / eps_;
    for (const Point& y : gamma) dom += kplus_ * birth_field_(t.offset(x, y));
    return {x, dom};
  }

  double field_at(const GridFunction& f, const Point& x, const FiniteConfiguration& gamma) const {
    double u = 0.0;
    for (const Point& y : gamma) u += f(torus().offset(x, y));
    return u;
  }

private:
  Grid grid_;
  double eps_ = 1.0;
  bool glauber_ = false;
  double s_ = 0.0, z_ = 0.0;
  double m_ = 1.0, kminus_ = 0.0, kplus_ = 0.0, kappa_ = 0.0;
  GridFunction death_field_, birth_field_;
  std::vector<double> cumulative_;
};

struct SimulationState {
  FiniteConfiguration configuration;
  /// Death field sum_{y != x} f(x - y) aligned with the canonical order.
  std::vector<double> field;
  double time = 0.0;
  std::uint64_t event_count = 0;
  Rng rng;
};

enum class StepOutcome { death, birth, rejected, absorbed };

inline SimulationState make_state(const Dynamics& dyn, FiniteConfiguration gamma, std::uint64_t seed) {
  SimulationState s;
  s.rng.seed(seed);
  s.configuration = std::move(gamma);
  s.field.resize(s.configuration.size());
  for (std::size_t i = 0; i < s.configuration.size(); ++i) {
    double u = 0.0;
    for (std::size_t j = 0; j < s.configuration.size(); ++j)
      if (j != i) u += dyn.death_field()(dyn.torus().offset(s.configuration[i], s.configuration[j]));
    s.field[i] = u;
  }
  return s;
}

/// Single thinning trial on a frozen configuration; returns the location when accepted.
inline std::optional<Point> propose_birth(const Dynamics& dyn, const FiniteConfiguration& gamma, Rng& rng) {
  auto [x, dom] = dyn.propose(gamma, rng);
  double b = dyn.birth_density(dyn.field_at(dyn.birth_field(), x, gamma));
  double u = uniform01(rng);
  if (dom > 0.0 && u * dom < b) return x;
  return std::nullopt;
}

struct PendingEvent {
  double death_total = 0.0;
  double total = 0.0;
  double time = std::numeric_limits<double>::infinity();
  bool absorbed = false;
};

/// Draws the time of the next event from the current total rate.
inline PendingEvent draw_event_time(SimulationState& st, const Dynamics& dyn) {
  PendingEvent ev;
  CompensatedSum dsum;
  for (double u : st.field) dsum.add(dyn.death_rate(u));
  ev.death_total = dsum.value();
  ev.total = ev.death_total + dyn.birth_bound(st.configuration.size());
  if (!(ev.total > 0.0)) {
    ev.absorbed = true;
    return ev;
  }
  if (!std::isfinite(ev.total)) throw NumericalAbort("total event rate is not finite");
  ev.time = st.time + exponential(st.rng, ev.total);
  return ev;
}

/// Executes a drawn event: a death with probability D/R, otherwise a thinned birth proposal.
inline StepOutcome apply_event(SimulationState& st, const Dynamics& dyn, const PendingEvent& ev,
                               std::size_t cap = kDefaultPopulationCap) {
  if (ev.absorbed) {
    st.time = std::numeric_limits<double>::infinity();
    return StepOutcome::absorbed;
  }
  const std::size_t n = st.configuration.size();
  st.time = ev.time;
  ++st.event_count;
  const Torus& t = dyn.torus();
  const GridFunction& f = dyn.death_field();
  const double D = ev.death_total;
  if (uniform01(st.rng) * ev.total < D) {
    double target = uniform01(st.rng) * D, acc = 0.0;
    std::size_t k = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += dyn.death_rate(st.field[i]);
      if (target < acc) {
        k = i;
        break;
      }
    }
    const Point x = st.configuration[k];
    st.configuration.erase(k);
    st.field.erase(st.field.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t i = 0; i < st.configuration.size(); ++i) st.field[i] -= f(t.offset(st.configuration[i], x));
    return StepOutcome::death;
  }
  auto [x, dom] = dyn.propose(st.configuration, st.rng);
  const double b = dyn.birth_density(dyn.field_at(dyn.birth_field(), x, st.configuration));
  if (!(dom > 0.0) || uniform01(st.rng) * dom >= b || st.configuration.contains(x)) return StepOutcome::rejected;
  if (n + 1 > cap)
    throw NumericalAbort("population cap " + std::to_string(cap) + " exceeded at time " + std::to_string(st.time));
  double u = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    st.field[i] += f(t.offset(st.configuration[i], x));
    u += f(t.offset(x, st.configuration[i]));
  }
  std::size_t pos = st.configuration.insert(x);
  st.field.insert(st.field.begin() + static_cast<std::ptrdiff_t>(pos), u);
  return StepOutcome::birth;
}

/// Advances the state by one event of the eps-scaled jump process (rates d_eps and eps^{-1} b_eps).
/// Time becomes +infinity when the total rate vanishes.
inline StepOutcome step(SimulationState& st, const Dynamics& dyn, std::size_t cap = kDefaultPopulationCap) {
  PendingEvent ev = draw_event_time(st, dyn);
  return apply_event(st, dyn, ev, cap);
}

/// Unscaled step of a model.
inline StepOutcome step(SimulationState& st, const AnyModel& model) { return step(st, Dynamics(model, 1.0)); }

/// Scaled step of a model.
inline StepOutcome step_scaled(SimulationState& st, const AnyModel& model, double eps) {
  return step(st, Dynamics(model, eps));
}

struct InitialCondition {
  enum class Kind { poisson, fixed, empty };
  Kind kind = Kind::poisson;
  double intensity = 1.0;
  std::size_t count = 0;
};

inline FiniteConfiguration sample_initial(const InitialCondition& ic, const Torus& t, Rng& rng) {
  std::size_t n = 0;
  if (ic.kind == InitialCondition::Kind::poisson) {
    std::poisson_distribution<std::size_t> pd(ic.intensity * t.volume());
    n = pd(rng);
  } else if (ic.kind == InitialCondition::Kind::fixed) {
    n = ic.count;
  }
  std::vector<Point> pts;
  pts.reserve(n);
  while (pts.size() < n) {
    Point p{uniform01(rng) * t.length(), 0.0};
    if (t.dim() == 2) p[1] = uniform01(rng) * t.length();
    if (std::find(pts.begin(), pts.end(), p) == pts.end()) pts.push_back(p);
  }
  return FiniteConfiguration(std::move(pts));
}

struct EnsembleConfig {
  std::size_t replicas = 1;
  std::uint64_t seed = 0;
  double T = 1.0;
  double eps = 1.0;
  InitialCondition initial;
  std::vector<double> checkpoints;
  /// Correlation samples are taken at burn_in + k*sample_dt up to T; only at T when sample_dt <= 0.
  double burn_in = 0.0;
  double sample_dt = 0.0;
  std::size_t threads = 1;
  std::size_t population_cap = kDefaultPopulationCap;
};

struct EmpiricalCorrelations {
  GridFunction k1;
  std::vector<double> k1_se;
  std::vector<double> k2_centers;
  std::vector<double> k2;
  std::vector<double> k2_se;
  double density = 0.0;
  double density_se = 0.0;
  std::size_t sample_count = 0;
};

struct CheckpointStats {
  double time = 0.0;
  double mean_population = 0.0;
  double population_se = 0.0;
  double mean_density = 0.0;
  double density_se = 0.0;
};

struct ReplicaSummary {
  std::uint64_t seed = 0;
  std::uint64_t events = 0;
  std::uint64_t births = 0;
  std::uint64_t deaths = 0;
  std::uint64_t rejected = 0;
  std::size_t final_population = 0;
  bool absorbed = false;
};

struct EnsembleResult {
  EmpiricalCorrelations correlations;
  std::vector<CheckpointStats> trajectory;
  std::vector<ReplicaSummary> replicas;
  /// Final configuration of every replica, in replica order.
  std::vector<FiniteConfiguration> final_states;
};

/// Bin index of the pair estimator: width L/(2M) on [0, L/2).
inline std::size_t pair_bins(const Grid& g) { return g.m(); }

inline double shell_volume(int dim, double a, double b) {
  return dim == 1 ? 2.0 * (b - a) : std::numbers::pi * (b * b - a * a);
}

struct ReplicaData {
  ReplicaSummary summary;
  std::vector<double> populations;
  std::vector<double> k1;
  std::vector<double> k2;
  double density = 0.0;
  std::size_t samples = 0;
  FiniteConfiguration final_state;
};

inline void accumulate_sample(const FiniteConfiguration& gamma, const Grid& g, std::vector<double>& k1,
                              std::vector<double>& k2) {
  const Torus& t = g.torus();
  const double h = g.spacing();
  const std::size_t m = g.m();
  for (const Point& p : gamma) {
    auto c0 = std::min(static_cast<std::size_t>(p[0] / h), m - 1);
    std::size_t c = c0;
    if (t.dim() == 2) c += m * std::min(static_cast<std::size_t>(p[1] / h), m - 1);
    k1[c] += 1.0;
  }
  const double width = t.length() / (2.0 * static_cast<double>(m));
  for (std::size_t i = 0; i < gamma.size(); ++i)
    for (std::size_t j = i + 1; j < gamma.size(); ++j) {
      double r = t.distance(gamma[i], gamma[j]);
      auto b = static_cast<std::size_t>(r / width);
      if (b < k2.size()) k2[b] += 2.0;
    }
}

inline ReplicaData run_replica(const Dynamics& dyn, const EnsembleConfig& cfg, std::size_t r) {
  ReplicaData out;
  const Grid& g = dyn.grid();
  const Torus& t = g.torus();
  out.summary.seed = cfg.seed ^ static_cast<std::uint64_t>(r);
  Rng init(out.summary.seed);
  FiniteConfiguration gamma0 = sample_initial(cfg.initial, t, init);
  SimulationState st = make_state(dyn, std::move(gamma0), init());
  out.k1.assign(g.size(), 0.0);
  out.k2.assign(pair_bins(g), 0.0);

  std::vector<double> samples;
  if (cfg.sample_dt > 0.0)
    for (double s = cfg.burn_in; s <= cfg.T + 1e-12; s += cfg.sample_dt) samples.push_back(std::min(s, cfg.T));
  else
    samples.push_back(cfg.T);
  std::vector<double> checks = cfg.checkpoints;
  std::sort(checks.begin(), checks.end());
  std::size_t ci = 0, si = 0;
  out.populations.assign(checks.size(), 0.0);

  auto record_until = [&](double upto) {
    while (ci < checks.size() && checks[ci] <= upto) out.populations[ci++] = static_cast<double>(st.configuration.size());
    while (si < samples.size() && samples[si] <= upto) {
      accumulate_sample(st.configuration, g, out.k1, out.k2);
      out.density += static_cast<double>(st.configuration.size()) / t.volume();
      ++out.samples;
      ++si;
    }
  };

  while (true) {
    PendingEvent ev = draw_event_time(st, dyn);
    if (ev.absorbed) {
      out.summary.absorbed = true;
      record_until(cfg.T);
      break;
    }
    if (ev.time > cfg.T) {
      record_until(cfg.T);
      break;
    }
    record_until(std::nextafter(ev.time, 0.0));
    StepOutcome o = apply_event(st, dyn, ev, cfg.population_cap);
    if (o == StepOutcome::death) ++out.summary.deaths;
    else if (o == StepOutcome::birth) ++out.summary.births;
    else ++out.summary.rejected;
  }
  out.summary.events = st.event_count;
  out.summary.final_population = st.configuration.size();
  out.final_state = st.configuration;
  return out;
}

inline EnsembleResult run_ensemble(const AnyModel& model, const EnsembleConfig& cfg) {
  if (cfg.replicas == 0) throw ConfigError("replicas must be at least 1");
  if (!(cfg.T >= 0.0)) throw ConfigError("T must be nonnegative");
  Dynamics dyn(model, cfg.eps);
  const Grid& g = dyn.grid();
  const Torus& t = g.torus();
  std::vector<ReplicaData> data(cfg.replicas);
  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(cfg.replicas);
  auto worker = [&]() {
    for (std::size_t r = next++; r < cfg.replicas; r = next++) {
      try {
        data[r] = run_replica(dyn, cfg, r);
      } catch (const std::exception& e) {
        errors[r] = e.what();
      }
    }
  };
  std::size_t nt = std::max<std::size_t>(1, std::min(cfg.threads, cfg.replicas));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t r = 0; r < cfg.replicas; ++r)
    if (!errors[r].empty()) throw NumericalAbort("replica " + std::to_string(r) + ": " + errors[r]);

  EnsembleResult res;
  const double R = static_cast<double>(cfg.replicas);
  auto mean_se = [&](auto get) {
    CompensatedSum s, s2;
    for (const auto& d : data) s.add(get(d));
    double mean = s.value() / R;
    for (const auto& d : data) {
      double v = get(d) - mean;
      s2.add(v * v);
    }
    double se = cfg.replicas > 1 ? std::sqrt(s2.value() / (R - 1.0) / R) : 0.0;
    return std::make_pair(mean, se);
  };

  std::vector<double> checks = cfg.checkpoints;
  std::sort(checks.begin(), checks.end());
  for (std::size_t c = 0; c < checks.size(); ++c) {
    auto [mp, sp] = mean_se([&](const ReplicaData& d) { return d.populations[c]; });
    res.trajectory.push_back({checks[c], mp, sp, mp / t.volume(), sp / t.volume()});
  }

  EmpiricalCorrelations& ec = res.correlations;
  const double cell = g.weight();
  std::vector<double> k1(g.size()), k1se(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto [m, s] = mean_se([&](const ReplicaData& d) { return d.samples ? d.k1[i] / (cell * static_cast<double>(d.samples)) : 0.0; });
    k1[i] = m;
    k1se[i] = s;
  }
  ec.k1 = GridFunction(g, std::move(k1));
  ec.k1_se = std::move(k1se);
  const double width = t.length() / (2.0 * static_cast<double>(g.m()));
  for (std::size_t b = 0; b < pair_bins(g); ++b) {
    double lo = width * static_cast<double>(b), hi = lo + width;
    double norm = t.volume() * shell_volume(t.dim(), lo, hi);
    auto [m, s] = mean_se([&](const ReplicaData& d) { return d.samples ? d.k2[b] / (norm * static_cast<double>(d.samples)) : 0.0; });
    ec.k2_centers.push_back(0.5 * (lo + hi));
    ec.k2.push_back(m);
    ec.k2_se.push_back(s);
  }
  auto [dm, ds] = mean_se([&](const ReplicaData& d) { return d.samples ? d.density / static_cast<double>(d.samples) : 0.0; });
  ec.density = dm;
  ec.density_se = ds;
  for (const auto& d : data) ec.sample_count += d.samples;
  for (auto& d : data) {
    res.replicas.push_back(d.summary);
    res.final_states.push_back(std::move(d.final_state));
  }
  return res;
}

}  // namespace sbd::sim
