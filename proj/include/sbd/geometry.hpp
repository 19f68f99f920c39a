#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sbd/error.hpp"

namespace sbd {

/// A point of the torus. The second coordinate is 0 when d = 1.
using Point = std::array<double, 2>;
using PointSpan = std::span<const Point>;

/// The flat torus [0,L)^d, d in {1,2}.
class Torus {
public:
  Torus() = default;
  Torus(int dim, double length) : dim_(dim), length_(length) {
    if (dim != 1 && dim != 2) throw ModelViolation("torus dimension must be 1 or 2");
    if (!(length > 0.0) || !std::isfinite(length)) throw ModelViolation("torus length must be positive");
  }

  int dim() const { return dim_; }
  double length() const { return length_; }
  double volume() const { return dim_ == 1 ? length_ : length_ * length_; }

  double wrap(double v) const {
    double r = std::fmod(v, length_);
    if (r < 0.0) r += length_;
    if (r >= length_) r -= length_;
    return r;
  }

  Point wrap(const Point& p) const {
    Point q{wrap(p[0]), 0.0};
    if (dim_ == 2) q[1] = wrap(p[1]);
    return q;
  }

  /// Displacement a - b reduced to [0,L)^d.
  Point offset(const Point& a, const Point& b) const {
    Point q{wrap(a[0] - b[0]), 0.0};
    if (dim_ == 2) q[1] = wrap(a[1] - b[1]);
    return q;
  }

  /// Minimum-image component of a displacement.
  double min_image(double v) const {
    double r = wrap(v);
    return r > 0.5 * length_ ? r - length_ : r;
  }

  double norm(const Point& disp) const {
    double a = min_image(disp[0]);
    if (dim_ == 1) return std::abs(a);
    double b = min_image(disp[1]);
    return std::hypot(a, b);
  }

  double distance(const Point& a, const Point& b) const { return norm(offset(a, b)); }

private:
  int dim_ = 1;
  double length_ = 1.0;
};

/// Uniform M^d grid on the torus. Node index layout is i0 + M*i1.
class Grid {
public:
  Grid() = default;
  Grid(Torus torus, std::size_t m) : torus_(torus), m_(m) {
    if (m == 0) throw ModelViolation("grid resolution must be positive");
  }

  const Torus& torus() const { return torus_; }
  int dim() const { return torus_.dim(); }
  std::size_t m() const { return m_; }
  std::size_t size() const { return torus_.dim() == 1 ? m_ : m_ * m_; }
  double spacing() const { return torus_.length() / static_cast<double>(m_); }
  double weight() const {
    double h = spacing();
    return torus_.dim() == 1 ? h : h * h;
  }

  Point node(std::size_t i) const {
    double h = spacing();
    if (torus_.dim() == 1) return {h * static_cast<double>(i), 0.0};
    return {h * static_cast<double>(i % m_), h * static_cast<double>(i / m_)};
  }

  /// Index of node(i) - node(j) on the torus.
  std::size_t offset_index(std::size_t i, std::size_t j) const {
    if (torus_.dim() == 1) return (i + m_ - j) % m_;
    std::size_t a = (i % m_ + m_ - j % m_) % m_;
    std::size_t b = (i / m_ + m_ - j / m_) % m_;
    return a + m_ * b;
  }

  /// Index of the negated offset.
  std::size_t negate_index(std::size_t i) const { return offset_index(0, i); }

  /// Index of the node nearest to p.
  std::size_t nearest(const Point& p) const {
    Point q = torus_.wrap(p);
    double h = spacing();
    auto axis = [&](double v) {
      auto k = static_cast<std::size_t>(std::llround(v / h));
      return k % m_;
    };
    if (torus_.dim() == 1) return axis(q[0]);
    return axis(q[0]) + m_ * axis(q[1]);
  }

  /// Exact node index of p, or size() when p is not a node.
  std::size_t index_of(const Point& p) const {
    std::size_t i = nearest(p);
    Point n = node(i);
    if (torus_.norm({n[0] - p[0], n[1] - p[1]}) <= 1e-9 * spacing()) return i;
    return size();
  }

  bool operator==(const Grid& o) const {
    return torus_.dim() == o.torus_.dim() && torus_.length() == o.torus_.length() && m_ == o.m_;
  }

private:
  Torus torus_;
  std::size_t m_ = 1;
};

/// Node values on a grid with multilinear periodic interpolation.
class GridFunction {
public:
  GridFunction() = default;
  GridFunction(Grid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) throw ModelViolation("grid function size mismatch");
  }

  static GridFunction constant(const Grid& g, double c) { return GridFunction(g, std::vector<double>(g.size(), c)); }

  static GridFunction sample(const Grid& g, const std::function<double(const Point&)>& f) {
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) v[i] = f(g.node(i));
    return GridFunction(g, std::move(v));
  }

  const Grid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  double operator()(const Point& p) const {
    const std::size_t m = grid_.m();
    const double h = grid_.spacing();
    Point q = grid_.torus().wrap(p);
    auto split = [&](double v, std::size_t& lo, double& frac) {
      double u = v / h;
      double f = std::floor(u);
      frac = u - f;
      lo = static_cast<std::size_t>(f) % m;
      if (frac < 1e-9) frac = 0.0;
      if (frac > 1.0 - 1e-9) {
        frac = 0.0;
        lo = (lo + 1) % m;
      }
    };
    std::size_t i0;
    double f0;
    split(q[0], i0, f0);
    std::size_t i0n = (i0 + 1) % m;
    if (grid_.dim() == 1) {
      if (f0 == 0.0) return values_[i0];
      return (1.0 - f0) * values_[i0] + f0 * values_[i0n];
    }
    std::size_t i1;
    double f1;
    split(q[1], i1, f1);
    std::size_t i1n = (i1 + 1) % m;
    auto at = [&](std::size_t a, std::size_t b) { return values_[a + m * b]; };
    if (f0 == 0.0 && f1 == 0.0) return at(i0, i1);
    return (1.0 - f0) * (1.0 - f1) * at(i0, i1) + f0 * (1.0 - f1) * at(i0n, i1) + (1.0 - f0) * f1 * at(i0, i1n) +
           f0 * f1 * at(i0n, i1n);
  }

  /// Quadrature integral over the torus.
  double integral() const { return grid_.weight() * std::accumulate(values_.begin(), values_.end(), 0.0); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double abs_max() const {
    double r = 0.0;
    for (double v : values_) r = std::max(r, std::abs(v));
    return r;
  }

private:
  Grid grid_;
  std::vector<double> values_;
};

}  // namespace sbd
