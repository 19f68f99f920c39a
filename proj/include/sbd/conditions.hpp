#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sbd/combinatorics.hpp"
#include "sbd/error.hpp"
#include "sbd/models.hpp"

namespace sbd::conditions {

using models::AnyModel;
using models::BdlpModel;
using models::GlauberModel;

/// One named inequality lhs < rhs (or lhs <= rhs when non-strict).
struct Inequality {
  std::string name;
  std::string expression;
  double lhs = 0.0;
  double rhs = 0.0;
  bool strict = true;
  bool holds = false;
};

struct ConditionReport {
  std::string model;
  double C = 0.0;
  double a1 = 1.0;
  double a2 = 0.0;
  bool bound_3_2 = false;
  bool bound_2 = false;
  double nu = 1.0;
  bool nu_window = false;
  std::optional<std::pair<double, double>> alpha_window;
  double contraction_q = 0.0;
  std::vector<Inequality> inequalities;
  /// Slack parameter of the plant-ecology chains; infinite when kappa^- = 0.
  std::optional<double> delta;
  std::string delta_formula;
  /// True when a1, a2 come from the closed-form chain rather than tight mediant bounds.
  bool chain_constants = false;
  models::GrowthConstants growth;
  double best_C = 0.0;
  double best_sum = 0.0;
  /// Grid node where the pointwise dispersal inequality is tightest.
  std::optional<Point> worst_node;
  double worst_margin = 0.0;

  double sum() const { return a1 + a2 / C; }
  bool parameters_hold() const {
    return std::all_of(inequalities.begin(), inequalities.end(), [](const Inequality& i) { return i.holds; });
  }
  std::vector<std::string> failed() const {
    std::vector<std::string> r;
    for (const auto& i : inequalities)
      if (!i.holds) r.push_back(i.name);
    if (!bound_3_2) r.push_back("generator_bound");
    return r;
  }
};

inline Inequality make_inequality(std::string name, std::string expr, double lhs, double rhs, bool strict = true) {
  Inequality q{std::move(name), std::move(expr), lhs, rhs, strict, false};
  q.holds = strict ? lhs < rhs : lhs <= rhs;
  return q;
}

/// beta_tau = integral of |exp(tau phi) - 1| over the torus.
inline double beta_tau(const GridFunction& phi, double tau) {
  double s = 0.0;
  for (double v : phi.values()) s += std::abs(std::expm1(tau * v));
  return s * phi.grid().weight();
}

inline void finish(ConditionReport& r) {
  const double sum = r.sum();
  r.bound_3_2 = sum < 1.5;
  r.bound_2 = sum < 2.0;
  r.contraction_q = sum - 1.0;
  r.nu = r.growth.nu;
  r.nu_window = r.a1 < 1.5 && r.nu >= 1.0 && r.nu < (r.C / r.a2) * (1.5 - r.a1);
  if (r.a2 == 0.0) r.nu_window = r.a1 < 1.5 && r.nu >= 1.0;
  r.alpha_window.reset();
  if (r.nu_window) {
    double lo = r.a2 / (r.C * (1.5 - r.a1));
    double hi = 1.0 / r.nu;
    if (lo < hi) r.alpha_window = std::make_pair(lo, hi);
    else r.nu_window = false;
  }
}

inline void require_C(double C) {
  if (!(C > 1.0) || !std::isfinite(C)) throw ModelViolation("weight C must exceed 1");
}

inline ConditionReport glauber_core(const GlauberModel& g, double C) {
  require_C(C);
  ConditionReport r;
  r.model = g.name();
  r.C = C;
  const double bs = beta_tau(g.phi(), g.s());
  const double bs1 = beta_tau(g.phi(), g.s() - 1.0);
  r.a1 = std::exp(C * bs);
  r.a2 = g.z() * std::exp(C * bs1);
  r.growth = g.growth_constants(C);
  r.inequalities.push_back(make_inequality("glauber_activity_bound", "exp(C*beta_s) + (z/C)*exp(C*beta_{s-1}) < 3/2",
                                           r.a1 + r.a2 / C, 1.5));
  if (g.s() == 0.0)
    r.inequalities.push_back(
        make_inequality("glauber_zero_s_activity_bound", "(z/C)*exp(C*beta_{-1}) < 1/2", r.a2 / C, 0.5));
  else
    r.inequalities.push_back(make_inequality("glauber_growth_window",
                                             "exp(C*beta_s) + (z/C)*exp(s*phi_bar + C*beta_{s-1}) < 3/2",
                                             r.a1 + r.a2 * std::exp(g.s() * g.phi_bar()) / C, 1.5));
  r.chain_constants = true;
  finish(r);
  return r;
}

inline ConditionReport bdlp_core(const BdlpModel& b, double C) {
  require_C(C);
  ConditionReport r;
  r.model = b.name();
  r.C = C;
  const double m = b.m(), km = b.kappa_minus(), kp = b.kappa_plus(), kappa = b.kappa();
  const GridFunction& am = b.a_minus();
  const GridFunction& ap = b.a_plus();
  const double factor = b.modified() ? 2.0 : 4.0;

  double worst = -std::numeric_limits<double>::infinity();
  std::size_t worst_i = 0;
  double ratio = 0.0;
  for (std::size_t i = 0; i < am.size(); ++i) {
    double margin = factor * kp * ap[i] - C * km * am[i];
    if (margin > worst) {
      worst = margin;
      worst_i = i;
    }
    double num = kp * ap[i], den = km * am[i];
    if (num > 0.0) ratio = std::max(ratio, den > 0.0 ? num / den : std::numeric_limits<double>::infinity());
  }
  r.worst_node = am.grid().node(worst_i);
  r.worst_margin = worst;

  if (b.modified()) {
    double lhs = 2.0 * std::max(km * C, 2.0 * kappa / C);
    r.inequalities.push_back(make_inequality("bdlp_modified_mortality_bound", "2*max(kappa_minus*C, 2*kappa/C) < m", lhs, m));
    r.inequalities.push_back(make_inequality("bdlp_dispersal_domination",
                                             "max_x [2*kappa_plus*a_plus(x) - C*kappa_minus*a_minus(x)] <= 0", worst,
                                             0.0, false));
  } else {
    r.inequalities.push_back(make_inequality("bdlp_mortality_bound", "4*kappa_minus*C < m", 4.0 * km * C, m));
    r.inequalities.push_back(make_inequality("bdlp_dispersal_domination",
                                             "max_x [4*kappa_plus*a_plus(x) - C*kappa_minus*a_minus(x)] <= 0", worst,
                                             0.0, false));
  }

  const double base = b.modified() ? 2.0 : 4.0;
  r.delta_formula = b.modified() ? "delta = m/(kappa_minus*C) - 2" : "delta = m/(kappa_minus*C) - 4";
  if (km > 0.0) r.delta = m / (km * C) - base;
  else r.delta = std::numeric_limits<double>::infinity();

  if (r.parameters_hold()) {
    r.chain_constants = true;
    r.a1 = std::isinf(*r.delta) ? 1.0 : 1.0 + 1.0 / (base + *r.delta);
    r.a2 = C / base;
  } else {
    r.chain_constants = false;
    r.a1 = 1.0 + C * km / m;
    r.a2 = std::max((kappa + C * kp) / m, ratio);
  }
  r.growth = b.growth_constants(C);
  finish(r);
  return r;
}

inline ConditionReport check_at(const AnyModel& model, double C) {
  return std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GlauberModel>) return glauber_core(m, C);
        else return bdlp_core(m, C);
      },
      model);
}

/// Scans a log grid of C values for the smallest a1 + a2/C among those where the parameter inequalities hold.
inline std::pair<double, double> best_C(const AnyModel& model, double lo = 1.01, double hi = 1000.0,
                                        std::size_t points = 400) {
  double best = std::numeric_limits<double>::infinity(), arg = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    double c = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(points - 1));
    ConditionReport r = check_at(model, c);
    if (!r.parameters_hold()) continue;
    double v = r.sum();
    if (std::isfinite(v) && v < best) {
      best = v;
      arg = c;
    }
  }
  return {arg, best};
}

inline void attach_best(ConditionReport& r, const AnyModel& model) {
  auto [c, v] = best_C(model);
  r.best_C = c;
  r.best_sum = std::isfinite(v) ? v : 0.0;
}

inline ConditionReport glauber_conditions(const GlauberModel& g, double C) {
  ConditionReport r = glauber_core(g, C);
  attach_best(r, AnyModel(g));
  return r;
}

inline ConditionReport bdlp_conditions(const BdlpModel& b, double C) {
  ConditionReport r = bdlp_core(b, C);
  attach_best(r, AnyModel(b));
  return r;
}

inline ConditionReport check_conditions(const AnyModel& model, double C) {
  ConditionReport r = check_at(model, C);
  attach_best(r, model);
  return r;
}

struct KernelBoundResult {
  double a1_hat = 0.0;
  double a2_hat = 0.0;
  std::vector<Point> worst_death_sample;
  std::vector<Point> worst_birth_sample;
};

/// integral of |K(x, xi; eta)| C^{|eta|} over eta, by Lebesgue-Poisson quadrature on the model grid.
inline double weighted_kernel_mass(const RenormalizedKernel& k, const Point& x, PointSpan xi, double C,
                                   std::size_t n_max) {
  const Grid& g = k.field().grid();
  combinatorics::QuadratureScheme scheme{g, n_max};
  const Torus& t = g.torus();
  const double u = k.field_sum(t, x, xi);
  if (k.form() == RenormalizedKernel::Form::exponential) {
    std::vector<double> f(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = std::abs(k.factor(k.field()(t.offset(x, g.node(i)))));
    combinatorics::CoherentState cs{std::abs(k.prefactor(0, u)), GridFunction(g, std::move(f))};
    return combinatorics::lp_integral(cs, C, scheme).value;
  }
  combinatorics::SetFunction h{[&](PointSpan eta) { return std::abs(k(x, xi, eta)); }, k.support_bound()};
  return combinatorics::lp_integral(h, C, scheme).value;
}

/// Checks the declared constants of a report against the kernel integrals on sampled configurations.
inline KernelBoundResult verify_kernel_bounds(const AnyModel& model, const ConditionReport& report,
                                              const std::vector<std::vector<Point>>& samples,
                                              std::size_t n_max = 12, double rel_tol = 1e-6) {
  KernelBoundResult res;
  auto death = std::visit([](const auto& m) { return m.death_kernel(KernelScaling::unscaled()); }, model);
  auto birth = std::visit([](const auto& m) { return m.birth_kernel(KernelScaling::unscaled()); }, model);
  const Torus& t = models::grid_of(model).torus();
  for (const auto& xi : samples) {
    if (xi.empty() || xi.size() > 4) throw ModelViolation("verify_kernel_bounds: samples must have 1..4 points");
    double dsum = 0.0, bsum = 0.0, D = 0.0;
    for (std::size_t i = 0; i < xi.size(); ++i) {
      std::vector<Point> rest;
      for (std::size_t j = 0; j < xi.size(); ++j)
        if (j != i) rest.push_back(xi[j]);
      D += death.rate(death.field_sum(t, xi[i], rest));
      dsum += weighted_kernel_mass(death, xi[i], rest, report.C, n_max);
      bsum += weighted_kernel_mass(birth, xi[i], rest, report.C, n_max);
    }
    if (!(D > 0.0)) throw ModelViolation("verify_kernel_bounds: vanishing total death rate");
    if (dsum / D > res.a1_hat) {
      res.a1_hat = dsum / D;
      res.worst_death_sample = xi;
    }
    if (bsum / D > res.a2_hat) {
      res.a2_hat = bsum / D;
      res.worst_birth_sample = xi;
    }
  }
  auto describe = [](const std::vector<Point>& xi) {
    std::ostringstream os;
    os << "{";
    for (std::size_t i = 0; i < xi.size(); ++i) os << (i ? ", " : "") << "(" << xi[i][0] << "," << xi[i][1] << ")";
    os << "}";
    return os.str();
  };
  if (res.a1_hat > report.a1 * (1.0 + rel_tol))
    throw ValidationError("death kernel bound exceeded: observed " + std::to_string(res.a1_hat) + " > a1 = " +
                          std::to_string(report.a1) + " at xi = " + describe(res.worst_death_sample));
  if (res.a2_hat > report.a2 * (1.0 + rel_tol))
    throw ValidationError("birth kernel bound exceeded: observed " + std::to_string(res.a2_hat) + " > a2 = " +
                          std::to_string(report.a2) + " at xi = " + describe(res.worst_birth_sample));
  return res;
}

}  // namespace sbd::conditions
