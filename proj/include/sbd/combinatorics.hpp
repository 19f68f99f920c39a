#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sbd/error.hpp"
#include "sbd/geometry.hpp"

namespace sbd::combinatorics {

inline constexpr std::size_t kTransformMaxSize = 20;
inline constexpr std::size_t kStarMaxSize = 12;

/// A finite set of distinct points kept in lexicographic order.
class FiniteConfiguration {
public:
  FiniteConfiguration() = default;
  FiniteConfiguration(std::initializer_list<Point> pts) : FiniteConfiguration(std::vector<Point>(pts)) {}
  explicit FiniteConfiguration(std::vector<Point> pts) : points_(std::move(pts)) {
    std::sort(points_.begin(), points_.end());
    if (std::adjacent_find(points_.begin(), points_.end()) != points_.end())
      throw InvalidConfiguration("configuration contains a repeated point");
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<Point>& points() const { return points_; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }
  operator PointSpan() const { return PointSpan(points_.data(), points_.size()); }
  PointSpan span() const { return *this; }

  bool contains(const Point& p) const { return std::binary_search(points_.begin(), points_.end(), p); }

  /// Inserts p and returns its position in the canonical order.
  std::size_t insert(const Point& p) {
    auto it = std::lower_bound(points_.begin(), points_.end(), p);
    if (it != points_.end() && *it == p) throw InvalidConfiguration("point already present");
    auto pos = static_cast<std::size_t>(it - points_.begin());
    points_.insert(it, p);
    return pos;
  }

  void erase(std::size_t index) {
    if (index >= points_.size()) throw InvalidConfiguration("erase index out of range");
    points_.erase(points_.begin() + static_cast<std::ptrdiff_t>(index));
  }

  /// Subconfiguration selected by a bit mask over the canonical order.
  FiniteConfiguration subset(std::uint64_t mask) const {
    FiniteConfiguration r;
    for (std::size_t i = 0; i < points_.size(); ++i)
      if (mask >> i & 1U) r.points_.push_back(points_[i]);
    return r;
  }

  static FiniteConfiguration merge(const FiniteConfiguration& a, const FiniteConfiguration& b) {
    std::vector<Point> v;
    v.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(v));
    return FiniteConfiguration(std::move(v));
  }

  bool operator==(const FiniteConfiguration&) const = default;

private:
  std::vector<Point> points_;
};

/// A real function on finite configurations, optionally vanishing above a cardinality.
struct SetFunction {
  std::function<double(PointSpan)> eval;
  std::optional<std::size_t> support_bound;

  double operator()(PointSpan eta) const {
    if (support_bound && eta.size() > *support_bound) return 0.0;
    return eval(eta);
  }
};

/// The function 1*(eta) = 0^{|eta|}.
inline SetFunction unit_star() {
  return {[](PointSpan eta) { return eta.empty() ? 1.0 : 0.0; }, 0};
}

inline void require_size(std::size_t n, std::size_t limit, const char* what) {
  if (n > limit)
    throw SizeError(std::string(what) + ": cardinality " + std::to_string(n) + " exceeds limit " +
                    std::to_string(limit));
}

/// (KG)(eta) = sum over all subsets xi of eta of G(xi).
inline double k_transform(const SetFunction& g, const FiniteConfiguration& eta) {
  require_size(eta.size(), kTransformMaxSize, "k_transform");
  const std::uint64_t n = eta.size();
  double acc = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    auto k = static_cast<std::size_t>(__builtin_popcountll(mask));
    if (g.support_bound && k > *g.support_bound) continue;
    acc += g(eta.subset(mask));
  }
  return acc;
}

/// (K^{-1}F)(eta) = sum over subsets xi of (-1)^{|eta \ xi|} F(xi).
inline double k_inverse(const SetFunction& f, const FiniteConfiguration& eta) {
  require_size(eta.size(), kTransformMaxSize, "k_inverse");
  const std::uint64_t n = eta.size();
  double acc = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    auto k = static_cast<std::size_t>(__builtin_popcountll(mask));
    if (f.support_bound && k > *f.support_bound) continue;
    double v = f(eta.subset(mask));
    acc += ((n - k) % 2 == 0) ? v : -v;
  }
  return acc;
}

/// Sum over ordered partitions (e1,e2,e3) of eta of G1(e1 u e2) G2(e2 u e3).
inline double star_convolution(const SetFunction& g1, const SetFunction& g2, const FiniteConfiguration& eta) {
  require_size(eta.size(), kStarMaxSize, "star_convolution");
  const std::size_t n = eta.size();
  std::vector<int> label(n, 0);
  double acc = 0.0;
  while (true) {
    std::uint64_t m1 = 0, m2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (label[i] == 0 || label[i] == 1) m1 |= std::uint64_t{1} << i;
      if (label[i] == 1 || label[i] == 2) m2 |= std::uint64_t{1} << i;
    }
    acc += g1(eta.subset(m1)) * g2(eta.subset(m2));
    std::size_t i = 0;
    while (i < n && label[i] == 2) label[i++] = 0;
    if (i == n) break;
    ++label[i];
  }
  return acc;
}

/// Regrouped form: sum_{xi in eta} G1(xi) sum_{zeta in xi} G2((eta \ xi) u zeta).
inline double star_convolution_regrouped(const SetFunction& g1, const SetFunction& g2,
                                         const FiniteConfiguration& eta) {
  require_size(eta.size(), kStarMaxSize, "star_convolution");
  const std::uint64_t n = eta.size();
  const std::uint64_t full = (std::uint64_t{1} << n) - 1;
  double acc = 0.0;
  for (std::uint64_t xi = 0; xi <= full; ++xi) {
    double a = g1(eta.subset(xi));
    if (a == 0.0) continue;
    double inner = 0.0;
    for (std::uint64_t zeta = xi;; zeta = (zeta - 1) & xi) {
      inner += g2(eta.subset((full & ~xi) | zeta));
      if (zeta == 0) break;
    }
    acc += a * inner;
  }
  return acc;
}

/// e(f, eta) = product of f over the points of eta.
template <class F>
double coherent_state(const F& f, PointSpan eta) {
  double r = 1.0;
  for (const Point& p : eta) r *= f(p);
  return r;
}

/// Set function view of a coherent state.
inline SetFunction coherent(std::function<double(const Point&)> f) {
  return {[f = std::move(f)](PointSpan eta) { return coherent_state(f, eta); }, std::nullopt};
}

struct QuadratureScheme {
  Grid grid;
  std::size_t n_max = 12;
};

struct LpResult {
  double value = 0.0;
  double tail_estimate = 0.0;
  std::vector<double> layers;
};

inline constexpr double kTupleBudget = 2e8;

/// Calls fn(indices) for every n-tuple of node indices in [0, nodes).
template <class Fn>
void for_each_tuple(std::size_t nodes, std::size_t n, Fn&& fn) {
  std::vector<std::size_t> idx(n, 0);
  if (n == 0) {
    fn(idx);
    return;
  }
  if (nodes == 0) return;
  while (true) {
    fn(idx);
    std::size_t i = 0;
    while (i < n && ++idx[i] == nodes) idx[i++] = 0;
    if (i == n) break;
  }
}

inline double tail_from_layers(const std::vector<double>& layers, bool truncated) {
  if (!truncated || layers.empty()) return 0.0;
  double last = std::abs(layers.back());
  if (layers.size() >= 2 && std::abs(layers[layers.size() - 2]) > 0.0) {
    double r = last / std::abs(layers[layers.size() - 2]);
    if (r < 1.0) return last * r / (1.0 - r);
  }
  return last;
}

/// Truncated Lebesgue-Poisson integral of C^{|eta|} H(eta) by tensor quadrature.
/// Tuples with repeated nodes are included.
inline LpResult lp_integral(const SetFunction& h, double c, const QuadratureScheme& scheme) {
  if (!(c > 0.0)) throw ModelViolation("lp_integral weight must be positive");
  const Grid& g = scheme.grid;
  std::size_t top = scheme.n_max;
  bool truncated = true;
  if (h.support_bound && *h.support_bound <= top) {
    top = *h.support_bound;
    truncated = false;
  }
  double budget = 0.0;
  for (std::size_t n = 0; n <= top; ++n) budget += std::pow(static_cast<double>(g.size()), static_cast<double>(n));
  if (budget > kTupleBudget)
    throw SizeError("lp_integral: " + std::to_string(budget) + " tuples exceed the enumeration budget");
  LpResult res;
  std::vector<Point> pts;
  const double w = g.weight();
  double fact = 1.0;
  for (std::size_t n = 0; n <= top; ++n) {
    if (n > 0) fact *= static_cast<double>(n);
    pts.assign(n, Point{});
    double sum = 0.0, comp = 0.0;
    for_each_tuple(g.size(), n, [&](const std::vector<std::size_t>& idx) {
      for (std::size_t i = 0; i < n; ++i) pts[i] = g.node(idx[i]);
      double v = h.eval(PointSpan(pts.data(), n));
      double t = sum + v;
      comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
      sum = t;
    });
    double layer = (sum + comp) * std::pow(c * w, static_cast<double>(n)) / fact;
    res.layers.push_back(layer);
    res.value += layer;
  }
  res.tail_estimate = tail_from_layers(res.layers, truncated);
  return res;
}

/// Scaled coherent state H(eta) = scale * e(f, eta).
struct CoherentState {
  double scale = 1.0;
  GridFunction f;
};

/// Exact layer evaluation of the same quadrature for coherent states.
inline LpResult lp_integral(const CoherentState& h, double c, const QuadratureScheme& scheme) {
  if (!(c > 0.0)) throw ModelViolation("lp_integral weight must be positive");
  double s = 0.0;
  const Grid& g = scheme.grid;
  for (std::size_t i = 0; i < g.size(); ++i) s += h.f[i];
  s *= c * g.weight();
  LpResult res;
  double term = h.scale;
  for (std::size_t n = 0; n <= scheme.n_max; ++n) {
    if (n > 0) term *= s / static_cast<double>(n);
    res.layers.push_back(term);
    res.value += term;
  }
  res.tail_estimate = tail_from_layers(res.layers, true);
  return res;
}

using TripleSetFunction = std::function<double(PointSpan, PointSpan, PointSpan)>;

/// Maximum discrepancy between the two sides of the Minlos identity
///   int sum_{xi in eta} H(xi, eta \ xi, eta) dl(eta) = int int H(xi, eta, xi u eta) dl(xi) dl(eta),
/// with both sides truncated to total cardinality <= size_max, reported per truncation level.
inline double minlos_check(const TripleSetFunction& h, const Grid& grid, std::size_t size_max) {
  require_size(size_max, 4, "minlos_check");
  const double w = grid.weight();
  std::vector<double> factorial(size_max + 1, 1.0);
  for (std::size_t i = 1; i <= size_max; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);
  double worst = 0.0;
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t n = 0; n <= size_max; ++n) {
    double layer = 0.0;
    std::vector<Point> all(n), a, b;
    for_each_tuple(grid.size(), n, [&](const std::vector<std::size_t>& idx) {
      for (std::size_t i = 0; i < n; ++i) all[i] = grid.node(idx[i]);
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
        a.clear();
        b.clear();
        for (std::size_t i = 0; i < n; ++i) (mask >> i & 1U ? a : b).push_back(all[i]);
        layer += h(a, b, all);
      }
    });
    lhs += layer * std::pow(w, static_cast<double>(n)) / factorial[n];
    double rlayer = 0.0;
    for (std::size_t p = 0; p <= n; ++p) {
      std::size_t q = n - p;
      double part = 0.0;
      std::vector<Point> xs(p), ys(q), un(n);
      for_each_tuple(grid.size(), p, [&](const std::vector<std::size_t>& ix) {
        for (std::size_t i = 0; i < p; ++i) xs[i] = grid.node(ix[i]);
        for_each_tuple(grid.size(), q, [&](const std::vector<std::size_t>& iy) {
          for (std::size_t i = 0; i < q; ++i) ys[i] = grid.node(iy[i]);
          std::copy(xs.begin(), xs.end(), un.begin());
          std::copy(ys.begin(), ys.end(), un.begin() + static_cast<std::ptrdiff_t>(p));
          part += h(xs, ys, un);
        });
      });
      rlayer += part / (factorial[p] * factorial[q]);
    }
    rhs += rlayer * std::pow(w, static_cast<double>(n));
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

}  // namespace sbd::combinatorics
