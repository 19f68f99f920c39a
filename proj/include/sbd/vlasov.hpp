#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sbd/combinatorics.hpp"
#include "sbd/error.hpp"
#include "sbd/fft.hpp"
#include "sbd/hierarchy.hpp"
#include "sbd/models.hpp"

namespace sbd::vlasov {

using models::AnyModel;

/// Exponential series truncated after the t^order term; the full exponential when order is empty.
inline double exp_series(double t, std::optional<std::size_t> order) {
  if (!order) return std::exp(t);
  double term = 1.0, s = 1.0;
  for (std::size_t j = 1; j <= *order; ++j) {
    term *= t / static_cast<double>(j);
    s += term;
  }
  return s;
}

/// Right-hand side of the mean-field equation, with spectral convolutions.
/// lp_order truncates the Lebesgue-Poisson series of the symbols at |xi| <= lp_order.
class VlasovOperator {
public:
  explicit VlasovOperator(const AnyModel& model, std::optional<std::size_t> lp_order = std::nullopt)
      : model_(model), order_(lp_order) {
    if (const auto* g = std::get_if<models::GlauberModel>(&model_)) {
      conv_d_ = std::make_unique<PeriodicConvolver>(g->phi());
    } else {
      const auto& b = std::get<models::BdlpModel>(model_);
      conv_d_ = std::make_unique<PeriodicConvolver>(b.a_minus());
      conv_b_ = std::make_unique<PeriodicConvolver>(b.a_plus());
    }
  }

  const AnyModel& model() const { return model_; }
  const Grid& grid() const { return models::grid_of(model_); }
  std::optional<std::size_t> lp_order() const { return order_; }

  /// Death coefficient int e(rho, xi) D_x^V(xi) dlambda(xi).
  GridFunction death_coefficient(const GridFunction& rho) const {
    std::vector<double> out(rho.size());
    if (const auto* g = std::get_if<models::GlauberModel>(&model_)) {
      auto u = conv_d_->apply(rho.values());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = exp_series(g->s() * u[i], order_);
    } else {
      const auto& b = std::get<models::BdlpModel>(model_);
      std::vector<double> u = use_first() ? conv_d_->apply(rho.values()) : std::vector<double>(rho.size(), 0.0);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = b.m() + b.kappa_minus() * u[i];
    }
    return GridFunction(rho.grid(), std::move(out));
  }

  /// Birth term int e(rho, xi) B_x^V(xi) dlambda(xi).
  GridFunction birth_term(const GridFunction& rho) const {
    std::vector<double> out(rho.size());
    if (const auto* g = std::get_if<models::GlauberModel>(&model_)) {
      auto u = conv_d_->apply(rho.values());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = g->z() * exp_series((g->s() - 1.0) * u[i], order_);
    } else {
      const auto& b = std::get<models::BdlpModel>(model_);
      std::vector<double> u = use_first() ? conv_b_->apply(rho.values()) : std::vector<double>(rho.size(), 0.0);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = b.kappa() + b.kappa_plus() * u[i];
    }
    return GridFunction(rho.grid(), std::move(out));
  }

  /// Glauber: -rho exp(s rho*phi) + z exp((s-1) rho*phi);
  /// plant ecology: kappa + kappa^+ (a^+ * rho) - kappa^- rho (a^- * rho) - m rho.
  GridFunction rhs(const GridFunction& rho) const {
    GridFunction d = death_coefficient(rho);
    GridFunction b = birth_term(rho);
    std::vector<double> out(rho.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -rho[i] * d[i] + b[i];
    return GridFunction(rho.grid(), std::move(out));
  }

private:
  bool use_first() const { return !order_ || *order_ >= 1; }

  AnyModel model_;
  std::optional<std::size_t> order_;
  std::unique_ptr<PeriodicConvolver> conv_d_, conv_b_;
};

/// Slow reference: the symbol integrals evaluated by brute-force Lebesgue-Poisson quadrature.
inline GridFunction generic_rhs(const AnyModel& model, const GridFunction& rho, std::size_t n_max) {
  const Grid& g = rho.grid();
  auto kd = std::visit([](const auto& m) { return m.death_kernel(KernelScaling::limit()); }, model);
  auto kb = std::visit([](const auto& m) { return m.birth_kernel(KernelScaling::limit()); }, model);
  combinatorics::QuadratureScheme scheme{g, n_max};
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.node(i);
    auto integrand = [&](const RenormalizedKernel& k) {
      return combinatorics::SetFunction{
          [&](PointSpan xi) { return combinatorics::coherent_state(rho, xi) * k(x, {}, xi); }, k.support_bound()};
    };
    double d = combinatorics::lp_integral(integrand(kd), 1.0, scheme).value;
    double b = combinatorics::lp_integral(integrand(kb), 1.0, scheme).value;
    out[i] = -rho[i] * d + b;
  }
  return GridFunction(g, std::move(out));
}

struct IntegrateOptions {
  /// Monitored bound alpha*C on sup rho; not enforced.
  std::optional<double> ball_radius;
  /// Undershoot below -abort_tol * max(1, sup rho) aborts; smaller negatives are clipped.
  double abort_tol = 1e-6;
};

struct VlasovSnapshot {
  double time = 0.0;
  GridFunction rho;
};

struct VlasovTrajectory {
  std::vector<VlasovSnapshot> snapshots;
  std::vector<std::string> warnings;
  double max_sup = 0.0;
  double clipped_mass = 0.0;
  bool left_ball = false;
  double stability_bound = 0.0;
};

/// RK4 in time for d rho/dt = rhs(rho), with clipping of small negative undershoots.
inline VlasovTrajectory integrate(const VlasovOperator& op, const GridFunction& rho0, double T, double dt,
                                  std::vector<double> snapshot_times = {}, IntegrateOptions opt = {}) {
  VlasovTrajectory tr;
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (rho0.min() < 0.0) throw ModelViolation("initial density must be nonnegative");
  const double lam = op.death_coefficient(rho0).abs_max();
  tr.stability_bound = lam > 0.0 ? 1.0 / (2.0 * lam) : std::numeric_limits<double>::infinity();
  if (dt > tr.stability_bound * (1.0 + 1e-12))
    throw ConfigError("time step " + std::to_string(dt) + " exceeds stability bound " +
                      std::to_string(tr.stability_bound));
  if (snapshot_times.empty()) snapshot_times = {0.0, T};
  std::sort(snapshot_times.begin(), snapshot_times.end());
  GridFunction rho = rho0;
  tr.max_sup = rho.max();
  const std::size_t n = rho.size();
  double t = 0.0;
  bool warned = false;
  auto combo = [&](const GridFunction& base, double a, const GridFunction& k) {
    GridFunction r = base;
    for (std::size_t i = 0; i < n; ++i) r[i] += a * k[i];
    return r;
  };
  for (double ts : snapshot_times) {
    if (ts > T + 1e-12 || ts < 0.0) throw ConfigError("snapshot time outside [0, T]");
    if (ts > t) {
      auto steps = static_cast<std::size_t>(std::ceil((ts - t) / dt - 1e-9));
      const double h = (ts - t) / static_cast<double>(steps);
      for (std::size_t s = 0; s < steps; ++s) {
        GridFunction k1 = op.rhs(rho);
        GridFunction k2 = op.rhs(combo(rho, 0.5 * h, k1));
        GridFunction k3 = op.rhs(combo(rho, 0.5 * h, k2));
        GridFunction k4 = op.rhs(combo(rho, h, k3));
        double sup = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          rho[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
          if (!std::isfinite(rho[i])) throw NumericalAbort("density became non-finite");
          sup = std::max(sup, rho[i]);
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (rho[i] >= 0.0) continue;
          if (rho[i] < -opt.abort_tol * std::max(1.0, sup))
            throw NumericalAbort("density undershoot " + std::to_string(rho[i]) + " beyond tolerance");
          if (rho[i] < -1e-12 && !warned) {
            tr.warnings.push_back("negative density clipped to zero");
            warned = true;
          }
          tr.clipped_mass += -rho[i] * rho.grid().weight();
          rho[i] = 0.0;
        }
        tr.max_sup = std::max(tr.max_sup, sup);
        if (opt.ball_radius && sup > *opt.ball_radius && !tr.left_ball) {
          tr.left_ball = true;
          tr.warnings.push_back("sup rho left the ball of radius alpha*C");
        }
      }
      t = ts;
    }
    tr.snapshots.push_back({ts, rho});
  }
  return tr;
}

struct ScalingConfig {
  std::vector<double> epsilons{1.0, 0.3, 0.1, 0.03};
  bool include_limit = true;
  double C = 2.0;
  std::size_t zeta_max = 2;
  hierarchy::Closure closure = hierarchy::Closure::poisson;
  int n_max = 2;
  double T = 1.0;
  double dt = 0.01;
  std::vector<double> snapshot_times;
};

struct ScalingRow {
  double eps = 0.0;
  bool limit = false;
  double time = 0.0;
  double error = 0.0;
  double k1_error = 0.0;
  double k2_error = 0.0;
};

inline bool is_constant(const GridFunction& f) {
  for (double v : f.values())
    if (v != f[0]) return false;
  return true;
}

/// Truncated-Ruelle distance between hierarchy solutions at scale eps and the coherent state of the
/// mean-field density, whose symbols are truncated at the same order zeta_max.
inline std::vector<ScalingRow> scaling_compare(const AnyModel& model, const GridFunction& rho0,
                                               const ScalingConfig& cfg) {
  std::vector<double> times = cfg.snapshot_times;
  if (times.empty()) times = {cfg.T};
  std::sort(times.begin(), times.end());
  const bool homogeneous = is_constant(rho0);
  VlasovOperator op(model, cfg.zeta_max);
  VlasovTrajectory ref = integrate(op, rho0, cfg.T, cfg.dt, times);
  hierarchy::CorrelationVector k0 = hierarchy::CorrelationVector::coherent(rho0, cfg.C, cfg.n_max, homogeneous);

  std::vector<std::pair<KernelScaling, bool>> runs;
  for (double e : cfg.epsilons) runs.emplace_back(KernelScaling::scaled(e), false);
  if (cfg.include_limit) runs.emplace_back(KernelScaling::limit(), true);

  std::vector<ScalingRow> rows;
  for (const auto& [sc, lim] : runs) {
    hierarchy::HierarchyConfig hc{cfg.zeta_max, cfg.closure, sc};
    hierarchy::Hierarchy h(model, hc);
    auto ev = hierarchy::evolve(h, k0, cfg.T, cfg.dt, times);
    for (std::size_t s = 0; s < times.size(); ++s) {
      const auto& k = ev.snapshots[s].k;
      const auto& rho = ref.snapshots[s].rho;
      hierarchy::CorrelationVector target =
          hierarchy::CorrelationVector::coherent(rho, cfg.C, cfg.n_max, homogeneous);
      ScalingRow row;
      row.eps = lim ? 0.0 : sc.eps;
      row.limit = lim;
      row.time = times[s];
      for (std::size_t i = 0; i < k.k1.size(); ++i)
        row.k1_error = std::max(row.k1_error, std::abs(k.k1[i] - target.k1[i]) / cfg.C);
      for (std::size_t i = 0; i < k.k2.size(); ++i)
        row.k2_error = std::max(row.k2_error, std::abs(k.k2[i] - target.k2[i]) / (cfg.C * cfg.C));
      row.error = std::max(row.k1_error, row.k2_error);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace sbd::vlasov
