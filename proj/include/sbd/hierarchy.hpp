#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sbd/combinatorics.hpp"
#include "sbd/conditions.hpp"
#include "sbd/error.hpp"
#include "sbd/models.hpp"

namespace sbd::hierarchy {

using models::AnyModel;

/// Truncated correlation functions k^(0), k^(1), k^(2) on a grid.
/// In homogeneous mode k^(2) is stored as a function of the separation x - y.
struct CorrelationVector {
  Grid grid;
  double C = 1.0;
  int n_max = 2;
  bool homogeneous = false;
  double k0 = 0.0;
  std::vector<double> k1;
  std::vector<double> k2;

  static CorrelationVector zeros(const Grid& g, double C, int n_max, bool homogeneous) {
    if (n_max != 1 && n_max != 2) throw ModelViolation("truncation order must be 1 or 2");
    CorrelationVector k;
    k.grid = g;
    k.C = C;
    k.n_max = n_max;
    k.homogeneous = homogeneous;
    const std::size_t n = g.size();
    k.k1.assign(n, 0.0);
    if (n_max == 2) k.k2.assign(homogeneous ? n : n * n, 0.0);
    return k;
  }

  /// Coherent state e(rho, .) truncated at order n_max.
  static CorrelationVector coherent(const GridFunction& rho, double C, int n_max, bool homogeneous) {
    const Grid& g = rho.grid();
    CorrelationVector k = zeros(g, C, n_max, homogeneous);
    k.k0 = 1.0;
    k.k1 = rho.values();
    if (n_max == 2) {
      if (homogeneous) {
        for (auto& v : k.k2) v = rho[0] * rho[0];
      } else {
        const std::size_t n = g.size();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) k.k2[i * n + j] = rho[i] * rho[j];
      }
    }
    return k;
  }

  std::size_t nodes() const { return grid.size(); }

  double pair(std::size_t i, std::size_t j) const {
    if (n_max < 2) return k1[i] * k1[j];
    return homogeneous ? k2[grid.offset_index(i, j)] : k2[i * nodes() + j];
  }

  double ruelle_norm() const {
    double r = std::abs(k0);
    for (double v : k1) r = std::max(r, std::abs(v) / C);
    for (double v : k2) r = std::max(r, std::abs(v) / (C * C));
    return r;
  }

  /// this += a * o
  void axpy(double a, const CorrelationVector& o) {
    k0 += a * o.k0;
    for (std::size_t i = 0; i < k1.size(); ++i) k1[i] += a * o.k1[i];
    for (std::size_t i = 0; i < k2.size(); ++i) k2[i] += a * o.k2[i];
  }

  void scale(double a) {
    k0 *= a;
    for (double& v : k1) v *= a;
    for (double& v : k2) v *= a;
  }

  double distance(const CorrelationVector& o) const {
    CorrelationVector d = *this;
    d.axpy(-1.0, o);
    return d.ruelle_norm();
  }

  GridFunction k1_function() const { return GridFunction(grid, k1); }
};

enum class Closure { none, zero, poisson };

inline Closure parse_closure(const std::string& s) {
  if (s == "none") return Closure::none;
  if (s == "zero") return Closure::zero;
  if (s == "poisson") return Closure::poisson;
  throw ConfigError("unknown closure '" + s + "'");
}

inline std::string closure_name(Closure c) {
  switch (c) {
    case Closure::none: return "none";
    case Closure::zero: return "zero";
    case Closure::poisson: return "poisson";
  }
  return "none";
}

struct HierarchyConfig {
  std::size_t zeta_max = 2;
  Closure closure = Closure::poisson;
  KernelScaling scaling;
};

namespace detail {

inline double binom2(std::size_t n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

/// Integrals of k against products of a kernel factor g(x - .).
struct Moments {
  std::vector<double> I1;   // sum_y w k1(y) g(x-y)
  std::vector<double> J;    // sum_y w k2(p,y) g(x-y); by separation x-p in homogeneous mode
  std::vector<double> I2;   // sum w^2 k2(y1,y2) g(x-y1) g(x-y2)
};

}  // namespace detail

/// Truncated dual generator and Kirkwood-Salzburg operator of a rate model.
class Hierarchy {
public:
  Hierarchy(const AnyModel& model, HierarchyConfig cfg) : cfg_(cfg) {
    death_ = std::visit([&](const auto& m) { return m.death_kernel(cfg.scaling); }, model);
    birth_ = std::visit([&](const auto& m) { return m.birth_kernel(cfg.scaling); }, model);
    grid_ = models::grid_of(model);
    jd_ = order_cap(death_);
    jb_ = order_cap(birth_);
  }

  const Grid& grid() const { return grid_; }
  const HierarchyConfig& config() const { return cfg_; }
  const RenormalizedKernel& death_kernel() const { return death_; }
  const RenormalizedKernel& birth_kernel() const { return birth_; }
  std::size_t death_order() const { return jd_; }
  std::size_t birth_order() const { return jb_; }

  /// (L* k)(eta) for |eta| in {1, 2}; (L* k)(empty) = 0.
  CorrelationVector apply_dual_generator(const CorrelationVector& k) const { return apply(k, Mode::generator); }

  /// (S k)(eta) = (-death integral without zeta = empty + birth integral) / D(eta); (S k)(empty) = 0.
  CorrelationVector ks_operator(const CorrelationVector& k) const { return apply(k, Mode::ks); }

  /// E(x) = b(x, empty) / d(x, empty) on singletons.
  CorrelationVector source(const CorrelationVector& shape) const {
    CorrelationVector e = CorrelationVector::zeros(grid_, shape.C, shape.n_max, shape.homogeneous);
    const double d0 = death_.prefactor(0, 0.0);
    if (!(d0 > 0.0)) throw ModelViolation("death rate d(x, empty) vanishes");
    for (double& v : e.k1) v = birth_.prefactor(0, 0.0) / d0;
    return e;
  }

  /// sup of D(eta) over represented singletons and pairs.
  double sup_death(int n_max) const {
    double s = death_.prefactor(0, 0.0);
    if (n_max >= 2) {
      const GridFunction& f = death_.field();
      for (std::size_t i = 0; i < grid_.size(); ++i)
        s = std::max(s, death_.prefactor(0, f[i]) + death_.prefactor(0, f[grid_.negate_index(i)]));
    }
    return s;
  }

  /// Closure-resolved integral of k(P u {y_1..y_j}) prod g(x - y_i) dy over j free points.
  double moment(const CorrelationVector& k, const detail::Moments& mo, std::size_t x, const std::size_t* P,
                std::size_t p, std::size_t j) const {
    const std::size_t n = p + j;
    auto Jv = [&](std::size_t pi) {
      return k.homogeneous ? mo.J[grid_.offset_index(x, pi)] : mo.J[pi * grid_.size() + x];
    };
    if (n <= static_cast<std::size_t>(k.n_max)) {
      if (p == 0) return j == 0 ? k.k0 : (j == 1 ? mo.I1[x] : mo.I2[x]);
      if (p == 1) return j == 0 ? k.k1[P[0]] : Jv(P[0]);
      return k.pair(P[0], P[1]);
    }
    if (cfg_.closure == Closure::none)
      throw TruncationError("order " + std::to_string(n) + " correlation required beyond truncation order " +
                            std::to_string(k.n_max) + " with closure disabled");
    if (cfg_.closure == Closure::zero) return 0.0;
    const double i1 = mo.I1[x];
    auto pw = [](double b, std::size_t e) {
      double r = 1.0;
      for (std::size_t i = 0; i < e; ++i) r *= b;
      return r;
    };
    double prod = 1.0;
    for (std::size_t i = 0; i < p; ++i) prod *= k.k1[P[i]];
    if (k.n_max == 1) return prod * pw(i1, j);
    double acc = 0.0;
    if (p == 2) acc += k.pair(P[0], P[1]) * pw(i1, j);
    if (j >= 1)
      for (std::size_t i = 0; i < p; ++i) {
        double others = 1.0;
        for (std::size_t l = 0; l < p; ++l)
          if (l != i) others *= k.k1[P[l]];
        acc += static_cast<double>(j) * pw(i1, j - 1) * Jv(P[i]) * others;
      }
    if (j >= 2) acc += detail::binom2(j) * mo.I2[x] * prod * pw(i1, j - 2);
    return acc / detail::binom2(n);
  }

  detail::Moments moments(const CorrelationVector& k, const RenormalizedKernel& kern, std::size_t jmax) const {
    detail::Moments mo;
    const std::size_t N = grid_.size();
    const double w = grid_.weight();
    const auto& g = kern.factor_table().values();
    mo.I1.assign(N, 0.0);
    if (jmax == 0) return mo;
    // Offsets x - y as a table.
    std::vector<std::size_t> off(N * N);
    for (std::size_t x = 0; x < N; ++x)
      for (std::size_t y = 0; y < N; ++y) off[x * N + y] = grid_.offset_index(x, y);
    for (std::size_t x = 0; x < N; ++x) {
      double s = 0.0;
      for (std::size_t y = 0; y < N; ++y) s += k.k1[y] * g[off[x * N + y]];
      mo.I1[x] = w * s;
    }
    if (k.n_max < 2) {
      mo.I2.assign(N, 0.0);
      for (std::size_t x = 0; x < N; ++x) mo.I2[x] = mo.I1[x] * mo.I1[x];
      mo.J.assign(k.homogeneous ? N : N * N, 0.0);
      return mo;
    }
    if (k.homogeneous) {
      // With k2(p, y) = K2(p - y): J(d) = sum_u w K2(u) g(d + u).
      mo.J.assign(N, 0.0);
      for (std::size_t d = 0; d < N; ++d) {
        double s = 0.0;
        for (std::size_t u = 0; u < N; ++u) s += k.k2[u] * g[off[d * N + grid_.negate_index(u)]];
        mo.J[d] = w * s;
      }
      mo.I2.assign(N, 0.0);
      // I2(x) = sum_p w g(x - p) J(x - p), independent of x.
      double s = 0.0;
      for (std::size_t d = 0; d < N; ++d) s += g[d] * mo.J[d];
      for (auto& v : mo.I2) v = w * s;
      return mo;
    }
    mo.J.assign(N * N, 0.0);
    for (std::size_t p = 0; p < N; ++p) {
      const double* row = &k.k2[p * N];
      double* out = &mo.J[p * N];
      for (std::size_t x = 0; x < N; ++x) {
        double s = 0.0;
        const std::size_t* o = &off[x * N];
        for (std::size_t y = 0; y < N; ++y) s += row[y] * g[o[y]];
        out[x] = w * s;
      }
    }
    mo.I2.assign(N, 0.0);
    for (std::size_t x = 0; x < N; ++x) {
      double s = 0.0;
      for (std::size_t p = 0; p < N; ++p) s += g[off[x * N + p]] * mo.J[p * N + x];
      mo.I2[x] = w * s;
    }
    return mo;
  }

private:
  enum class Mode { generator, ks };

  std::size_t order_cap(const RenormalizedKernel& k) const {
    auto sb = k.support_bound();
    return sb ? std::min(*sb, cfg_.zeta_max) : cfg_.zeta_max;
  }

  struct Terms {
    double D = 0.0, death_off = 0.0, birth = 0.0;
  };

  Terms singleton(const CorrelationVector& k, const detail::Moments& md, const detail::Moments& mb,
                  std::size_t x) const {
    Terms t;
    t.D = death_.prefactor(0, 0.0);
    const std::size_t P[1] = {x};
    double fact = 1.0;
    for (std::size_t j = 1; j <= jd_; ++j) {
      fact *= static_cast<double>(j);
      double c = death_.prefactor(j, 0.0);
      if (c != 0.0) t.death_off += c / fact * moment(k, md, x, P, 1, j);
    }
    fact = 1.0;
    for (std::size_t j = 0; j <= jb_; ++j) {
      if (j > 0) fact *= static_cast<double>(j);
      double c = birth_.prefactor(j, 0.0);
      if (c != 0.0) t.birth += c / fact * moment(k, mb, x, nullptr, 0, j);
    }
    return t;
  }

  Terms pair(const CorrelationVector& k, const detail::Moments& md, const detail::Moments& mb, std::size_t a,
             std::size_t b) const {
    Terms t;
    const std::size_t P[2] = {a, b};
    for (int side = 0; side < 2; ++side) {
      const std::size_t x = side == 0 ? a : b;
      const std::size_t xp = side == 0 ? b : a;
      const std::size_t o = grid_.offset_index(x, xp);
      const double ud = death_.field()[o];
      const double ub = birth_.field()[o];
      t.D += death_.prefactor(0, ud);
      double fact = 1.0;
      for (std::size_t j = 1; j <= jd_; ++j) {
        fact *= static_cast<double>(j);
        double c = death_.prefactor(j, ud);
        if (c != 0.0) t.death_off += c / fact * moment(k, md, x, P, 2, j);
      }
      const std::size_t Q[1] = {xp};
      fact = 1.0;
      for (std::size_t j = 0; j <= jb_; ++j) {
        if (j > 0) fact *= static_cast<double>(j);
        double c = birth_.prefactor(j, ub);
        if (c != 0.0) t.birth += c / fact * moment(k, mb, x, Q, 1, j);
      }
    }
    return t;
  }

  double combine(const Terms& t, double kval, Mode mode) const {
    if (mode == Mode::generator) return -t.D * kval - t.death_off + t.birth;
    if (!(t.D > 0.0)) throw ModelViolation("Kirkwood-Salzburg operator: total death rate D(eta) vanishes");
    return (-t.death_off + t.birth) / t.D;
  }

  CorrelationVector apply(const CorrelationVector& k, Mode mode) const {
    if (!(k.grid == grid_)) throw ModelViolation("correlation vector grid does not match the model grid");
    const std::size_t N = grid_.size();
    detail::Moments md = moments(k, death_, jd_);
    detail::Moments mb = moments(k, birth_, jb_);
    CorrelationVector out = CorrelationVector::zeros(grid_, k.C, k.n_max, k.homogeneous);
    out.k0 = 0.0;
    if (k.homogeneous) {
      double v = combine(singleton(k, md, mb, 0), k.k1[0], mode);
      for (auto& e : out.k1) e = v;
      if (k.n_max == 2)
        for (std::size_t r = 0; r < N; ++r) out.k2[r] = combine(pair(k, md, mb, r, 0), k.pair(r, 0), mode);
      return out;
    }
    for (std::size_t x = 0; x < N; ++x) out.k1[x] = combine(singleton(k, md, mb, x), k.k1[x], mode);
    if (k.n_max == 2)
      for (std::size_t a = 0; a < N; ++a)
        for (std::size_t b = a; b < N; ++b) {
          double v = combine(pair(k, md, mb, a, b), k.pair(a, b), mode);
          out.k2[a * N + b] = v;
          out.k2[b * N + a] = v;
        }
    return out;
  }

  HierarchyConfig cfg_;
  Grid grid_;
  RenormalizedKernel death_, birth_;
  std::size_t jd_ = 0, jb_ = 0;
};

struct Snapshot {
  double time = 0.0;
  CorrelationVector k;
  double norm = 0.0;
};

struct EvolveResult {
  std::vector<Snapshot> snapshots;
  std::vector<std::string> warnings;
  double stability_bound = 0.0;
};

/// Classical RK4 for dk/dt = L* k with snapshots at the requested times.
inline EvolveResult evolve(const Hierarchy& h, const CorrelationVector& k0, double T, double dt,
                           std::vector<double> snapshot_times = {}, double blowup_factor = 10.0) {
  EvolveResult res;
  res.stability_bound = 1.0 / (2.0 * h.sup_death(k0.n_max));
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (dt > res.stability_bound * (1.0 + 1e-12))
    throw ConfigError("time step " + std::to_string(dt) + " exceeds stability bound " +
                      std::to_string(res.stability_bound));
  if (snapshot_times.empty()) snapshot_times = {0.0, T};
  std::sort(snapshot_times.begin(), snapshot_times.end());
  const double n0 = k0.ruelle_norm();
  const double limit = blowup_factor * std::max(n0, 1e-300);
  CorrelationVector k = k0;
  double t = 0.0;
  for (double ts : snapshot_times) {
    if (ts > T + 1e-12 || ts < 0.0) throw ConfigError("snapshot time outside [0, T]");
    if (ts > t) {
      auto steps = static_cast<std::size_t>(std::ceil((ts - t) / dt - 1e-9));
      const double hstep = (ts - t) / static_cast<double>(steps);
      for (std::size_t s = 0; s < steps; ++s) {
        CorrelationVector a = h.apply_dual_generator(k);
        CorrelationVector tmp = k;
        tmp.axpy(0.5 * hstep, a);
        CorrelationVector b = h.apply_dual_generator(tmp);
        tmp = k;
        tmp.axpy(0.5 * hstep, b);
        CorrelationVector c = h.apply_dual_generator(tmp);
        tmp = k;
        tmp.axpy(hstep, c);
        CorrelationVector d = h.apply_dual_generator(tmp);
        k.axpy(hstep / 6.0, a);
        k.axpy(hstep / 3.0, b);
        k.axpy(hstep / 3.0, c);
        k.axpy(hstep / 6.0, d);
        const double nk = k.ruelle_norm();
        if (!std::isfinite(nk) || nk > limit)
          throw NumericalAbort("hierarchy norm " + std::to_string(nk) + " exceeds " + std::to_string(blowup_factor) +
                               " times its initial value at t = " + std::to_string(t + hstep * (s + 1)));
      }
      t = ts;
    }
    res.snapshots.push_back({ts, k, k.ruelle_norm()});
  }
  return res;
}

/// Same, with a warning when the generator bound fails for the unscaled model at weight C.
inline EvolveResult evolve(const AnyModel& model, const HierarchyConfig& cfg, const CorrelationVector& k0, double T,
                           double dt, std::vector<double> snapshot_times = {}) {
  Hierarchy h(model, cfg);
  conditions::ConditionReport rep = conditions::check_at(model, k0.C);
  EvolveResult res = evolve(h, k0, T, dt, std::move(snapshot_times));
  if (!rep.bound_3_2)
    res.warnings.push_back("a1 + a2/C = " + std::to_string(rep.sum()) + " is not below 3/2 at C = " +
                           std::to_string(k0.C));
  return res;
}

struct StationaryResult {
  CorrelationVector k_inv;
  /// A priori bound q^n ||E|| / (1 - q) after n iterations.
  double certificate = 0.0;
  /// A posteriori bound q / (1 - q) times the last increment.
  double error_bound = 0.0;
  double residual = 0.0;
  double q = 0.0;
  std::size_t iterations = 0;
};

/// k_inv = 1* + (1 - S)^{-1} E by the iteration k <- S k + E from k = 0.
inline StationaryResult stationary_solve(const AnyModel& model, const HierarchyConfig& cfg, double C, int n_max,
                                         bool homogeneous, double tol, std::size_t max_iter = 100000) {
  conditions::ConditionReport rep = conditions::check_at(model, C);
  const double q = rep.contraction_q;
  if (!(q < 1.0))
    throw NumericalAbort("stationary solve refused: contraction bound q = " + std::to_string(q) + " is not below 1");
  if (!(tol > 0.0)) throw ConfigError("tolerance must be positive");
  Hierarchy h(model, cfg);
  CorrelationVector shape = CorrelationVector::zeros(h.grid(), C, n_max, homogeneous);
  CorrelationVector E = h.source(shape);
  const double threshold = q > 0.0 ? tol * (1.0 - q) / q : std::numeric_limits<double>::infinity();
  CorrelationVector k = shape;
  StationaryResult res;
  res.q = q;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    CorrelationVector next = h.ks_operator(k);
    next.axpy(1.0, E);
    double inc = next.distance(k);
    k = std::move(next);
    res.iterations = it;
    res.error_bound = q > 0.0 ? q / (1.0 - q) * inc : 0.0;
    if (!std::isfinite(inc)) throw NumericalAbort("stationary iteration diverged");
    if (inc < threshold || inc == 0.0) break;
    if (it == max_iter) throw NumericalAbort("stationary iteration did not converge in max_iter steps");
  }
  CorrelationVector check = h.ks_operator(k);
  check.axpy(1.0, E);
  res.residual = check.distance(k);
  res.certificate = std::pow(q, static_cast<double>(res.iterations)) * E.ruelle_norm() / (1.0 - q);
  k.k0 = 1.0;
  res.k_inv = std::move(k);
  return res;
}

/// A quasi-observable supported on |eta| <= 2, stored on grid nodes.
struct QuasiObservable {
  Grid grid;
  double g0 = 0.0;
  std::vector<double> g1;
  std::vector<double> g2;

  double at(const std::vector<std::size_t>& idx) const {
    const std::size_t N = grid.size();
    if (idx.empty()) return g0;
    if (idx.size() == 1) return g1[idx[0]];
    if (idx.size() == 2) return g2[idx[0] * N + idx[1]];
    return 0.0;
  }

  /// ||G||_C = sum_n (1/n!) sum w^n |G| C^n.
  double norm(double C) const {
    const double w = grid.weight();
    double s = std::abs(g0);
    for (double v : g1) s += w * C * std::abs(v);
    for (double v : g2) s += 0.5 * w * w * C * C * std::abs(v);
    return s;
  }
};

/// Pair-average extension of a truncated correlation vector to any order, at a node tuple.
inline double extended_correlation(const CorrelationVector& k, Closure closure, const std::vector<std::size_t>& idx) {
  const std::size_t n = idx.size();
  if (n == 0) return k.k0;
  if (n == 1) return k.k1[idx[0]];
  if (n == 2 && k.n_max == 2) return k.pair(idx[0], idx[1]);
  if (closure == Closure::none) throw TruncationError("correlation order beyond truncation");
  if (closure == Closure::zero) return 0.0;
  if (k.n_max == 1) {
    double p = 1.0;
    for (auto i : idx) p *= k.k1[i];
    return p;
  }
  double acc = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      double p = k.pair(idx[a], idx[b]);
      for (std::size_t c = 0; c < n; ++c)
        if (c != a && c != b) p *= k.k1[idx[c]];
      acc += p;
    }
  return acc / detail::binom2(n);
}

/// Brute-force (L G)(eta) at a node tuple, from subset sums with kernels truncated at zeta orders.
inline double quasi_generator(const Hierarchy& h, const QuasiObservable& G, const std::vector<std::size_t>& eta) {
  const Grid& g = h.grid();
  const std::size_t n = eta.size();
  const RenormalizedKernel& kd = h.death_kernel();
  const RenormalizedKernel& kb = h.birth_kernel();
  auto kernel = [&](const RenormalizedKernel& k, std::size_t x, const std::vector<std::size_t>& xi,
                    const std::vector<std::size_t>& zeta) {
    double u = 0.0;
    for (auto y : xi) u += k.field()[g.offset_index(x, y)];
    double c = k.prefactor(zeta.size(), u);
    for (auto y : zeta) c *= k.factor_table()[g.offset_index(x, y)];
    return c;
  };
  double res = 0.0;
  std::vector<std::size_t> xi, rest, xi_minus, with_x;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    xi.clear();
    rest.clear();
    for (std::size_t i = 0; i < n; ++i) (mask >> i & 1U ? xi : rest).push_back(eta[i]);
    // Death part: -G(xi) sum_{x in xi} K^d_x(xi \ x; eta \ xi).
    if (xi.size() <= 2 && rest.size() <= h.death_order() && !xi.empty()) {
      double gv = G.at(xi);
      if (gv != 0.0)
        for (std::size_t a = 0; a < xi.size(); ++a) {
          xi_minus.clear();
          for (std::size_t b = 0; b < xi.size(); ++b)
            if (b != a) xi_minus.push_back(xi[b]);
          res -= gv * kernel(kd, xi[a], xi_minus, rest);
        }
    }
    // Birth part: sum_x w G(xi u x) K^b_x(xi; eta \ xi).
    if (xi.size() <= 1 && rest.size() <= h.birth_order()) {
      double s = 0.0;
      for (std::size_t x = 0; x < g.size(); ++x) {
        with_x = xi;
        with_x.push_back(x);
        double gv = G.at(with_x);
        if (gv != 0.0) s += gv * kernel(kb, x, xi, rest);
      }
      res += g.weight() * s;
    }
  }
  return res;
}

/// <<G, k>> = sum_n (1/n!) sum over node n-tuples of w^n G k.
inline double pairing(const QuasiObservable& G, const CorrelationVector& k) {
  const std::size_t N = G.grid.size();
  const double w = G.grid.weight();
  double s = G.g0 * k.k0;
  for (std::size_t i = 0; i < N; ++i) s += w * G.g1[i] * k.k1[i];
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) s += 0.5 * w * w * G.g2[i * N + j] * k.pair(i, j);
  return s;
}

/// <<L G, k-bar>> with k-bar the closure extension of k, by brute-force tuple enumeration.
inline double pairing_generator_side(const Hierarchy& h, const QuasiObservable& G, const CorrelationVector& k) {
  const Grid& g = h.grid();
  const double w = g.weight();
  const std::size_t top = std::max<std::size_t>(2 + h.death_order(), 1 + h.birth_order());
  double total = 0.0, fact = 1.0;
  for (std::size_t n = 0; n <= top; ++n) {
    if (n > 0) fact *= static_cast<double>(n);
    double layer = 0.0;
    combinatorics::for_each_tuple(g.size(), n, [&](const std::vector<std::size_t>& idx) {
      double lg = quasi_generator(h, G, idx);
      if (lg != 0.0) layer += lg * extended_correlation(k, h.config().closure, idx);
    });
    total += layer * std::pow(w, static_cast<double>(n)) / fact;
  }
  return total;
}

}  // namespace sbd::hierarchy
