// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sbd/combinatorics.hpp"
#include "sbd/conditions.hpp"
#include "sbd/hierarchy.hpp"
#include "sbd/models.hpp"
#include "sbd/simulator.hpp"
#include "sbd/vlasov.hpp"

using namespace sbd;
using namespace sbd::models;
using combinatorics::FiniteConfiguration;
using combinatorics::SetFunction;
using hierarchy::Closure;
using hierarchy::CorrelationVector;
using hierarchy::Hierarchy;

namespace {

std::mt19937_64 gen(515);
double uni(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen); }

/// Records the first few failures of one criterion.
struct Check {
  int failures = 0;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures < 5) std::printf("    failed: %s\n", what.c_str());
    ++failures;
  }
  void less(double value, double bound, const std::string& what) {
    expect(value < bound, what + " (" + std::to_string(value) + " >= " + std::to_string(bound) + ")");
  }
};

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3e", v);
  return b;
}

GridFunction gaussian_kernel(const Grid& g, double w) {
  return sample_normalized(g, {KernelProfile::Kind::gaussian, 1.0, w, 0.0});
}

BdlpModel plant_delta_four(const Grid& g, double C) {
  double km = 1.0 / (8.0 * C);
  return BdlpModel({1.0, km, C * km / 8.0, 0.0, false}, gaussian_kernel(g, 0.7), gaussian_kernel(g, 0.7));
}

BdlpModel detailed_balance(const Grid& g, double z, double m = 1.0, double km = 0.05) {
  auto a = gaussian_kernel(g, 0.8);
  return BdlpModel({m, km, z * km, z * m, true}, a, a);
}

GlauberModel glauber(const Grid& g, double s, double z, double amp, double w) {
  return GlauberModel(s, z, sample_radial(g, {KernelProfile::Kind::gaussian, amp, w, 0.0}));
}

GridFunction bumpy(const Grid& g, double base, double amp) {
  return GridFunction::sample(g, [&](const Point& p) { return base + amp * std::cos(2.0 * M_PI * p[0] / g.torus().length()); });
}

std::vector<Point> random_points(std::size_t n, double L, bool two_d = true) {
  std::vector<Point> v;
  while (v.size() < n) {
    Point p{uni(0, L), two_d ? uni(0, L) : 0.0};
    if (std::find(v.begin(), v.end(), p) == v.end()) v.push_back(p);
  }
  return v;
}

SetFunction random_set_function(std::optional<std::size_t> bound = std::nullopt) {
  double a = uni(-1, 1), b = uni(-1, 1), c = uni(-1, 1), e = uni(0.5, 1.5);
  return {[=](PointSpan eta) {
            double s = 0.0, q = 1.0;
            for (const Point& p : eta) {
              s += std::sin(a * p[0] + b * p[1]);
              q *= (c + std::cos(p[0] * e));
            }
            return s * s + q + c * static_cast<double>(eta.size());
          },
          bound};
}

SetFunction from_span(const std::function<double(const FiniteConfiguration&)>& f) {
  return {[f](PointSpan e) { return f(FiniteConfiguration(std::vector<Point>(e.begin(), e.end()))); }, std::nullopt};
}

CorrelationVector random_vector(const Grid& g, double C, bool homogeneous, double k0 = 0.0) {
  auto k = CorrelationVector::zeros(g, C, 2, homogeneous);
  const std::size_t N = g.size();
  if (homogeneous) {
    double v = uni(-C, C);
    for (auto& e : k.k1) e = v;
    for (std::size_t r = 0; r < N; ++r) {
      std::size_t nr = g.negate_index(r);
      if (nr < r) continue;
      k.k2[r] = k.k2[nr] = uni(-C * C, C * C);
    }
  } else {
    for (auto& e : k.k1) e = uni(-C, C);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = i; j < N; ++j) k.k2[i * N + j] = k.k2[j * N + i] = uni(-C * C, C * C);
  }
  k.scale(1.0 / k.ruelle_norm());
  k.k0 = k0;
  return k;
}

hierarchy::QuasiObservable random_observable(const Grid& g) {
  const std::size_t N = g.size();
  hierarchy::QuasiObservable G{g, uni(-1, 1), std::vector<double>(N), std::vector<double>(N * N)};
  for (auto& v : G.g1) v = uni(-1, 1);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i; j < N; ++j) G.g2[i * N + j] = G.g2[j * N + i] = uni(-1, 1);
  return G;
}

/// Brute-force (K0^{-1} rate(x, . u xi))(eta).
template <class Rate>
double brute_k0inv(const Rate& rate, const Point& x, const std::vector<Point>& xi, const std::vector<Point>& eta) {
  SetFunction f{[&](PointSpan sub) {
                  std::vector<Point> u(xi);
                  u.insert(u.end(), sub.begin(), sub.end());
                  return rate(x, PointSpan(u));
                },
                std::nullopt};
  return combinatorics::k_inverse(f, FiniteConfiguration(eta));
}

// 1. Combinatorial identities.
int combinatorial_identities() {
  Check c;
  double worst_round = 0.0, worst_exp = 0.0;
  for (int t = 0; t < 1000; ++t) {
    auto eta = FiniteConfiguration(random_points(static_cast<std::size_t>(t % 7), 5.0));
    SetFunction g = random_set_function(t % 3 == 0 ? std::optional<std::size_t>(t % 7) : std::nullopt);
    SetFunction kg = from_span([&](const FiniteConfiguration& e) { return combinatorics::k_transform(g, e); });
    double ref = g(eta);
    worst_round = std::max(worst_round, std::abs(combinatorics::k_inverse(kg, eta) - ref) / (1.0 + std::abs(ref)));
    double a = uni(-1, 1), b = uni(-1, 1);
    auto f = [=](const Point& p) { return a * std::sin(p[0]) + b * p[1]; };
    auto fp1 = [=](const Point& p) { return f(p) + 1.0; };
    double e1 = combinatorics::k_transform(combinatorics::coherent(f), eta);
    double e2 = combinatorics::coherent_state(fp1, eta.span());
    worst_exp = std::max(worst_exp, std::abs(e1 - e2) / (1.0 + std::abs(e2)));
  }
  c.expect(worst_round <= 1e-12, "K(K^-1 g) round trip " + fmt(worst_round));
  c.expect(worst_exp <= 1e-12, "K e(f) = e(f+1) " + fmt(worst_exp));

  Grid g(Torus(1, 2.0), 64);
  GridFunction f = GridFunction::sample(g, [](const Point& p) { return 0.5 + 0.4 * std::cos(M_PI * p[0]); });
  auto lp = combinatorics::lp_integral(combinatorics::CoherentState{1.0, f}, 1.0, {g, 12});
  double exact = std::exp(f.integral()), rel = std::abs(lp.value - exact) / exact;
  c.less(rel, 1e-6, "integral of e(f) vs exp of integral");

  Grid gm(Torus(1, 1.5), 6);
  auto fm = [](const Point& p) { return 0.5 + 0.2 * std::sin(p[0]); };
  auto hm = [](const Point& p) { return 0.3 * std::cos(2.0 * p[0]); };
  double minlos = combinatorics::minlos_check(
      [&](PointSpan a, PointSpan b, PointSpan) {
        return combinatorics::coherent_state(fm, a) * combinatorics::coherent_state(hm, b);
      },
      gm, 4);
  c.less(minlos, 1e-8, "Minlos residual");
  std::printf("    round trip %s, exponential %s, LP rel %s, Minlos %s\n", fmt(worst_round).c_str(),
              fmt(worst_exp).c_str(), fmt(rel).c_str(), fmt(minlos).c_str());
  return c.failures;
}

// 2. Kernel closed forms against brute-force inversion.
int kernel_closed_forms() {
  Check c;
  Grid g(Torus(1, 6.0), 32);
  std::vector<AnyModel> models{glauber(g, 0.0, 0.9, 0.8, 0.7), glauber(g, 0.4, 0.9, 0.8, 0.7),
                               glauber(g, 1.0, 0.9, 0.8, 0.7),
                               BdlpModel({1.0, 0.2, 0.15, 0.0, false}, gaussian_kernel(g, 0.6), gaussian_kernel(g, 0.9)),
                               BdlpModel({1.0, 0.2, 0.15, 0.4, true}, gaussian_kernel(g, 0.6), gaussian_kernel(g, 0.9))};
  double worst = 0.0;
  for (const auto& am : models) {
    std::visit(
        [&](const auto& m) {
          auto d = [&](const Point& x, PointSpan xi) { return m.death(x, xi); };
          auto b = [&](const Point& x, PointSpan xi) { return m.birth(x, xi); };
          for (std::size_t nxi = 0; nxi <= 3; ++nxi)
            for (std::size_t neta = 0; neta <= 4; ++neta)
              for (int rep = 0; rep < 4; ++rep) {
                auto pts = random_points(nxi + neta + 1, 6.0, false);
                Point x = pts.back();
                std::vector<Point> xi(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(nxi));
                std::vector<Point> eta(pts.begin() + static_cast<std::ptrdiff_t>(nxi), pts.end() - 1);
                worst = std::max(worst, std::abs(m.k0inv_death(x, xi, eta) - brute_k0inv(d, x, xi, eta)));
                worst = std::max(worst, std::abs(m.k0inv_birth(x, xi, eta) - brute_k0inv(b, x, xi, eta)));
              }
        },
        am);
  }
  c.less(worst, 1e-10, "closed form vs brute force");
  std::printf("    max deviation %s over |eta| <= 4, |xi| <= 3\n", fmt(worst).c_str());
  return c.failures;
}

// 3. Conditions arithmetic for the plant-ecology example.
int conditions_arithmetic() {
  Check c;
  Grid g(Torus(1, 10.0), 64);
  const double C = 3.0;
  auto m = plant_delta_four(g, C);
  auto r = conditions::bdlp_conditions(m, C);
  c.expect(r.parameters_hold(), "model hypotheses hold");
  c.expect(r.delta.has_value() && std::abs(*r.delta - 4.0) < 1e-12, "delta = 4");
  double chain = 1.0 + 1.0 / (4.0 + r.delta.value_or(0.0)) + 0.25;
  c.less(std::abs(r.sum() - chain), 1e-12, "a1 + a2/C equals the chain value");
  c.expect(r.sum() < 1.5 && r.bound_3_2, "a1 + a2/C < 3/2");
  std::vector<std::vector<Point>> samples;
  for (int t = 0; t < 200; ++t) {
    std::vector<Point> xi;
    std::vector<std::size_t> used;
    while (xi.size() < static_cast<std::size_t>(1 + t % 4)) {
      std::size_t i = static_cast<std::size_t>(uni(0, static_cast<double>(g.size())));
      if (std::find(used.begin(), used.end(), i) != used.end()) continue;
      used.push_back(i);
      xi.push_back(g.node(i));
    }
    samples.push_back(xi);
  }
  try {
    auto v = conditions::verify_kernel_bounds(AnyModel(m), r, samples);
    c.expect(v.a1_hat <= r.a1 * (1 + 1e-6) && v.a2_hat <= r.a2 * (1 + 1e-6), "sampled constants within declared");
    std::printf("    a1 + a2/C = %.6f (delta %.3f), sampled a1 %.6f <= %.6f, a2 %.6f <= %.6f\n", r.sum(),
                r.delta.value_or(0.0), v.a1_hat, r.a1, v.a2_hat, r.a2);
  } catch (const std::exception& e) {
    c.expect(false, std::string("verify_kernel_bounds threw: ") + e.what());
  }
  return c.failures;
}

// 4. Kirkwood-Salzburg contraction and exact stationary solutions.
int ks_and_stationary() {
  Check c;
  Grid g(Torus(1, 6.0), 16);
  struct Case {
    AnyModel m;
    double C;
  };
  std::vector<Case> cases{{AnyModel(plant_delta_four(g, 3.0)), 3.0},
                          {AnyModel(detailed_balance(g, 0.5)), 4.0},
                          {AnyModel(glauber(g, 0.5, 0.3, 0.4, 0.5)), 1.5}};
  double worst_excess = -1.0;
  for (const auto& cs : cases) {
    auto rep = conditions::check_at(cs.m, cs.C);
    Hierarchy h(cs.m, {2, Closure::poisson, KernelScaling::unscaled()});
    for (int t = 0; t < 100; ++t) {
      auto k = random_vector(g, cs.C, t % 2 == 0);
      double ratio = h.ks_operator(k).ruelle_norm() / k.ruelle_norm();
      worst_excess = std::max(worst_excess, ratio - rep.contraction_q);
    }
  }
  c.expect(worst_excess <= 1e-6, "||Sk||/||k|| exceeds q by " + fmt(worst_excess));

  Grid g32(Torus(1, 8.0), 32);
  auto vac = hierarchy::stationary_solve(AnyModel(plant_delta_four(g32, 3.0)), {}, 3.0, 2, false, 1e-10);
  bool exact = vac.k_inv.k0 == 1.0;
  for (double v : vac.k_inv.k1) exact = exact && v == 0.0;
  for (double v : vac.k_inv.k2) exact = exact && v == 0.0;
  c.expect(exact, "plain model stationary solution is the vacuum");

  Grid g64(Torus(1, 8.0), 64);
  const double z = 0.5;
  auto db = hierarchy::stationary_solve(AnyModel(detailed_balance(g64, z)), {}, 4.0, 2, false, 1e-8);
  double dev1 = 0.0, dev2 = 0.0;
  for (double v : db.k_inv.k1) dev1 = std::max(dev1, std::abs(v - z));
  for (double v : db.k_inv.k2) dev2 = std::max(dev2, std::abs(v - z * z));
  c.expect(dev1 <= 1e-5 && dev2 <= 1e-5, "detailed balance gives z and z^2");
  std::printf("    worst ||Sk||/||k|| - q = %s; detailed balance |k1-z| %s, |k2-z^2| %s, bound %s\n",
              fmt(worst_excess).c_str(), fmt(dev1).c_str(), fmt(dev2).c_str(), fmt(db.error_bound).c_str());
  return c.failures;
}

// 5. Generator duality.
int duality() {
  Check c;
  Grid g(Torus(1, 6.0), 32);
  std::vector<AnyModel> models{
      BdlpModel({1.0, 0.2, 0.3, 0.4, true}, gaussian_kernel(g, 0.6), gaussian_kernel(g, 0.9)),
      glauber(g, 0.6, 0.8, 0.7, 0.5)};
  double worst = 0.0;
  int trials = 0;
  for (const auto& m : models) {
    Hierarchy h(m, {2, Closure::poisson, KernelScaling::unscaled()});
    for (int t = 0; t < 10; ++t, ++trials) {
      auto G = random_observable(g);
      auto k = random_vector(g, 2.0, false, uni(-1, 1));
      double lhs = hierarchy::pairing_generator_side(h, G, k);
      double rhs = hierarchy::pairing(G, h.apply_dual_generator(k));
      worst = std::max(worst, std::abs(lhs - rhs) / (G.norm(2.0) * k.ruelle_norm()));
    }
  }
  c.less(worst, 1e-6, "normalized duality gap");
  std::printf("    %d pairs, worst normalized gap %s\n", trials, fmt(worst).c_str());
  return c.failures;
}

// 6. Simulator laws.
int simulator_laws() {
  Check c;
  {
    Grid g(Torus(1, 10.0), 16);
    const double m = 0.8;
    const std::size_t n0 = 40;
    sim::EnsembleConfig cfg;
    cfg.replicas = 1000;
    cfg.seed = 99;
    cfg.T = 3.0;
    cfg.threads = 4;
    cfg.initial = {sim::InitialCondition::Kind::fixed, 0.0, n0};
    cfg.checkpoints = {0.5, 1.0, 2.0, 3.0};
    auto a = gaussian_kernel(g, 0.5);
    auto res = sim::run_ensemble(AnyModel(BdlpModel({m, 0.0, 0.0, 0.0, false}, a, a)), cfg);
    for (const auto& p : res.trajectory) {
      double expect = oracle::pure_death_mean(static_cast<double>(n0), m, p.time);
      double z = std::abs(p.mean_population - expect) / p.population_se;
      c.expect(z < 3.0, "pure death at t=" + std::to_string(p.time) + " off by " + std::to_string(z) + " SE");
      std::printf("    pure death t=%.1f: %.3f vs %.3f (SE %.3f)\n", p.time, p.mean_population, expect, p.population_se);
    }
  }
  {
    Grid g(Torus(1, 20.0), 32);
    const double z = 0.5;
    sim::EnsembleConfig cfg;
    cfg.replicas = 300;
    cfg.seed = 3;
    cfg.T = 10.0;
    cfg.threads = 4;
    cfg.initial = {sim::InitialCondition::Kind::poisson, z, 0};
    cfg.checkpoints = {1.0, 5.0, 10.0};
    auto res = sim::run_ensemble(AnyModel(detailed_balance(g, z)), cfg);
    for (const auto& p : res.trajectory) {
      double dev = std::abs(p.mean_density - z) / p.density_se;
      c.expect(dev < 3.0, "detailed balance at t=" + std::to_string(p.time) + " off by " + std::to_string(dev) + " SE");
      std::printf("    detailed balance t=%.0f: k1 %.4f vs z %.4f (SE %.4f)\n", p.time, p.mean_density, z, p.density_se);
    }
  }
  {
    Grid g(Torus(1, 10.0), 32);
    sim::Dynamics dyn(AnyModel(glauber(g, 0.5, 1.2, 0.7, 0.5)), 1.0);
    sim::Rng r0(1);
    auto gamma = sim::sample_initial({sim::InitialCondition::Kind::poisson, 1.0, 0}, g.torus(), r0);
    auto a = sim::make_state(dyn, gamma, 42), b = sim::make_state(dyn, gamma, 42);
    bool same = true;
    for (int i = 0; i < 5000; ++i) {
      sim::step(a, dyn);
      sim::step(b, dyn);
      same = same && a.time == b.time && a.configuration == b.configuration;
    }
    c.expect(same, "identical seeds reproduce the trajectory bit-exactly");
  }
  return c.failures;
}

// 7. Mean-field oracles.
int vlasov_oracles() {
  Check c;
  {
    Grid g(Torus(1, 6.0), 32);
    auto a = gaussian_kernel(g, 0.5);
    const double m = 0.5, km = 0.3, kp = 1.1, rho0 = 0.2;
    vlasov::VlasovOperator op{AnyModel(BdlpModel({m, km, kp, 0.0, false}, a, a))};
    auto tr = vlasov::integrate(op, GridFunction::constant(g, rho0), 5.0, 0.01, {5.0});
    double exact = oracle::logistic(rho0, kp - m, km, 5.0), worst = 0.0;
    for (double v : tr.snapshots.back().rho.values()) worst = std::max(worst, std::abs(v - exact) / exact);
    c.less(worst, 1e-6, "logistic relative error at T=5");
    std::printf("    logistic rel error %s at T=5\n", fmt(worst).c_str());
  }
  Grid g(Torus(1, 6.0), 32);
  const double z = 1.5;
  for (double s : {0.0, 0.5, 1.0}) {
    auto m = glauber(g, s, z, 0.6, 0.5);
    const double beta = m.phi().integral();
    vlasov::VlasovOperator op{AnyModel(m)};
    auto tr = vlasov::integrate(op, GridFunction::constant(g, 0.1), 60.0, 0.05);
    double rho = tr.snapshots.back().rho[0];
    double res = std::abs(rho * std::exp(beta * rho) - z);
    c.less(res, 1e-8, "steady state residual at s=" + std::to_string(s));
    c.less(std::abs(rho - oracle::glauber_fixed_point(beta, z)), 1e-8, "steady state vs bisection at s=" + std::to_string(s));
    std::printf("    s=%.1f: rho* %.10f, residual %s\n", s, rho, fmt(res).c_str());
  }
  return c.failures;
}

// 8. Scaling convergence towards the mean-field limit.
int scaling_convergence() {
  Check c;
  Grid g(Torus(1, 6.0), 16);
  vlasov::ScalingConfig cfg;
  cfg.epsilons = {1.0, 0.3, 0.1, 0.03};
  cfg.T = 1.0;
  cfg.snapshot_times = {1.0};
  auto rows = vlasov::scaling_compare(AnyModel(glauber(g, 0.5, 0.8, 0.6, 0.5)), bumpy(g, 0.5, 0.2), cfg);
  std::vector<double> e;
  double limit = 1.0;
  for (const auto& r : rows) {
    if (r.time != 1.0) continue;
    if (r.limit) limit = r.error;
    else e.push_back(r.error);
  }
  c.expect(e.size() == 4, "four scaled runs");
  for (std::size_t i = 1; i < e.size(); ++i) c.expect(e[i] < e[i - 1], "error decreases at step " + std::to_string(i));
  if (e.size() == 4) c.less(e[3], 0.25 * e[0], "e(0.03) < e(1)/4");
  c.less(limit, 1e-4, "limit hierarchy tracks the mean-field density");
  std::printf("    e(eps, 1):");
  for (double v : e) std::printf(" %s", fmt(v).c_str());
  std::printf("; limit %s\n", fmt(limit).c_str());
  return c.failures;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    int (*run)();
  };
  const Criterion all[] = {{1, "combinatorial identities", combinatorial_identities},
                           {2, "kernel closed forms", kernel_closed_forms},
                           {3, "conditions arithmetic", conditions_arithmetic},
                           {4, "KS contraction and stationary solutions", ks_and_stationary},
                           {5, "generator duality", duality},
                           {6, "simulator laws", simulator_laws},
                           {7, "mean-field oracles", vlasov_oracles},
                           {8, "scaling convergence", scaling_convergence}};
  int failed = 0;
  for (const auto& cr : all) {
    auto t0 = std::chrono::steady_clock::now();
    int f = 0;
    try {
      f = cr.run();
    } catch (const std::exception& e) {
      std::printf("    exception: %s\n", e.what());
      f = 1;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("Criterion %d: %s (%s, %.1f s)\n", cr.id, f == 0 ? "PASS" : "FAIL", cr.name, secs);
    std::fflush(stdout);
    failed += f != 0;
  }
  return failed == 0 ? 0 : 1;
}
