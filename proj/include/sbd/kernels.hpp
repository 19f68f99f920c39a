#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sbd/error.hpp"
#include "sbd/geometry.hpp"

namespace sbd {

/// Radial profile of a pair potential or dispersal kernel.
struct KernelProfile {
  enum class Kind { gaussian, box, bump };
  Kind kind = Kind::gaussian;
  double amplitude = 1.0;
  double width = 1.0;
  /// Support radius for the Gaussian; infinite when <= 0.
  double cutoff = 0.0;

  double operator()(double r) const {
    switch (kind) {
      case Kind::gaussian:
        if (cutoff > 0.0 && r >= cutoff) return 0.0;
        return amplitude * std::exp(-r * r / (2.0 * width * width));
      case Kind::box:
        if (r < width) return amplitude;
        if (r == width) return 0.5 * amplitude;
        return 0.0;
      case Kind::bump: {
        if (r >= width) return 0.0;
        double t = r / width;
        return amplitude * std::exp(1.0 - 1.0 / (1.0 - t * t));
      }
    }
    return 0.0;
  }

  static Kind parse(const std::string& s) {
    if (s == "gaussian") return Kind::gaussian;
    if (s == "box") return Kind::box;
    if (s == "bump") return Kind::bump;
    throw ModelViolation("unknown kernel profile '" + s + "'");
  }

  static std::string name(Kind k) {
    switch (k) {
      case Kind::gaussian: return "gaussian";
      case Kind::box: return "box";
      case Kind::bump: return "bump";
    }
    return "gaussian";
  }
};

/// Samples a radial profile onto the offset grid using minimum-image distance.
inline GridFunction sample_radial(const Grid& grid, const KernelProfile& profile) {
  return GridFunction::sample(grid, [&](const Point& p) { return profile(grid.torus().norm(p)); });
}

/// Same, divided by its quadrature mass so that the grid integral is exactly 1.
inline GridFunction sample_normalized(const Grid& grid, const KernelProfile& profile) {
  GridFunction f = sample_radial(grid, profile);
  double mass = f.integral();
  if (!(mass > 0.0)) throw ModelViolation("kernel has zero mass on this grid");
  for (double& v : f.values()) v /= mass;
  return f;
}

/// Selects the unscaled, epsilon-scaled or limiting (Vlasov) renormalized kernel.
struct KernelScaling {
  double eps = 1.0;
  bool vlasov = false;

  static KernelScaling unscaled() { return {}; }
  static KernelScaling scaled(double e) {
    if (!(e > 0.0 && e <= 1.0)) throw ModelViolation("epsilon must lie in (0,1]");
    return {e, false};
  }
  static KernelScaling limit() { return {0.0, true}; }
};

/// Renormalized kernel eps^{-|zeta|} (K0^{-1} r_eps(x, . u xi))(zeta) of the form
///   c_{|zeta|}(U) * prod_{y in zeta} g(x - y),  U = sum_{y in xi} f(x - y).
class RenormalizedKernel {
public:
  enum class Form { exponential, affine };

  RenormalizedKernel() = default;

  /// c_j = base * exp(eps tau U), g = (exp(eps tau f) - 1) / eps.
  static RenormalizedKernel exponential(double base, double tau, const GridFunction& field, KernelScaling sc) {
    RenormalizedKernel k;
    k.form_ = Form::exponential;
    k.base_ = base;
    k.coupling_ = tau;
    k.scaling_ = sc;
    k.field_ = field;
    k.build_table();
    return k;
  }

  /// c_0 = base + eps kappa U, c_1 = 1, c_j = 0 for j >= 2, g = kappa f.
  static RenormalizedKernel affine(double base, double kappa, const GridFunction& field, KernelScaling sc) {
    RenormalizedKernel k;
    k.form_ = Form::affine;
    k.base_ = base;
    k.coupling_ = kappa;
    k.scaling_ = sc;
    k.field_ = field;
    k.build_table();
    return k;
  }

  Form form() const { return form_; }
  double base() const { return base_; }
  double coupling() const { return coupling_; }
  const KernelScaling& scaling() const { return scaling_; }
  const GridFunction& field() const { return field_; }
  /// g sampled on the offset grid.
  const GridFunction& factor_table() const { return table_; }

  std::optional<std::size_t> support_bound() const {
    if (form_ == Form::affine) return 1;
    if (factor_table().abs_max() == 0.0) return 0;
    return std::nullopt;
  }

  /// Scaled rate r_eps(x, xi) as a function of the field U.
  double rate(double u) const { return prefactor(0, u); }

  double prefactor(std::size_t j, double u) const {
    const double e = scaling_.vlasov ? 0.0 : scaling_.eps;
    if (form_ == Form::exponential) return base_ * std::exp(e * coupling_ * u);
    if (j == 0) return base_ + e * coupling_ * u;
    return j == 1 ? 1.0 : 0.0;
  }

  double factor(double fvalue) const {
    if (form_ == Form::affine) return coupling_ * fvalue;
    if (scaling_.vlasov) return coupling_ * fvalue;
    return std::expm1(scaling_.eps * coupling_ * fvalue) / scaling_.eps;
  }

  double field_sum(const Torus& t, const Point& x, PointSpan xi) const {
    double u = 0.0;
    for (const Point& y : xi) u += field_(t.offset(x, y));
    return u;
  }

  double operator()(const Point& x, PointSpan xi, PointSpan zeta) const {
    const Torus& t = field_.grid().torus();
    double c = prefactor(zeta.size(), field_sum(t, x, xi));
    if (c == 0.0) return 0.0;
    for (const Point& y : zeta) c *= factor(field_(t.offset(x, y)));
    return c;
  }

private:
  void build_table() {
    std::vector<double> v(field_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = factor(field_[i]);
    table_ = GridFunction(field_.grid(), std::move(v));
  }

  Form form_ = Form::exponential;
  double base_ = 1.0;
  double coupling_ = 0.0;
  KernelScaling scaling_;
  GridFunction field_;
  GridFunction table_;
};

}  // namespace sbd
