#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "sbd/combinatorics.hpp"
#include "sbd/error.hpp"
#include "sbd/geometry.hpp"
#include "sbd/kernels.hpp"

namespace sbd::models {

using combinatorics::FiniteConfiguration;

/// Constants of the growth bound d(x, xi) <= A (1 + |xi|)^N nu^{|xi|}.
struct GrowthConstants {
  double A = 1.0;
  int N = 0;
  double nu = 1.0;

  double bound(std::size_t size) const {
    return A * std::pow(1.0 + static_cast<double>(size), N) * std::pow(nu, static_cast<double>(size));
  }
};

inline void require_outside(const Point& x, PointSpan xi, const char* what) {
  for (const Point& y : xi)
    if (y == x) throw ModelViolation(std::string(what) + ": x must not belong to the configuration");
}

inline void require_eps(double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw ModelViolation("epsilon must lie in (0,1]");
}

/// Shared point-level API on top of a pair of renormalized kernels.
template <class Derived>
class KernelModel {
public:
  double death(const Point& x, PointSpan xi) const { return death_eps(x, xi, 1.0); }
  double birth(const Point& x, PointSpan xi) const { return birth_eps(x, xi, 1.0); }

  double death_eps(const Point& x, PointSpan xi, double eps) const {
    require_eps(eps);
    require_outside(x, xi, "death");
    const auto& k = self().death_kernel(KernelScaling::scaled(eps));
    return k.rate(k.field_sum(self().grid().torus(), x, xi));
  }

  /// b_eps(x, xi); the generator uses eps^{-1} times this.
  double birth_eps(const Point& x, PointSpan xi, double eps) const {
    require_eps(eps);
    require_outside(x, xi, "birth");
    const auto& k = self().birth_kernel(KernelScaling::scaled(eps));
    return k.rate(k.field_sum(self().grid().torus(), x, xi));
  }

  double k0inv_death(const Point& x, PointSpan xi, PointSpan eta) const {
    return scaled_kernels(1.0, x, xi, eta).first;
  }
  double k0inv_birth(const Point& x, PointSpan xi, PointSpan eta) const {
    return scaled_kernels(1.0, x, xi, eta).second;
  }

  /// Renormalized kernels eps^{-|eta|} (K0^{-1} d_eps(x, . u xi))(eta) and the birth analogue.
  std::pair<double, double> scaled_kernels(double eps, const Point& x, PointSpan xi, PointSpan eta) const {
    require_eps(eps);
    require_outside(x, xi, "scaled_kernels");
    require_outside(x, eta, "scaled_kernels");
    auto sc = KernelScaling::scaled(eps);
    return {self().death_kernel(sc)(x, xi, eta), self().birth_kernel(sc)(x, xi, eta)};
  }

  std::pair<double, double> vlasov_symbols(const Point& x, PointSpan eta) const {
    require_outside(x, eta, "vlasov_symbols");
    auto sc = KernelScaling::limit();
    return {self().death_kernel(sc)(x, {}, eta), self().birth_kernel(sc)(x, {}, eta)};
  }

private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
};

/// Glauber-type dynamics: d = exp(s sum phi), b = z exp((s-1) sum phi).
class GlauberModel : public KernelModel<GlauberModel> {
public:
  GlauberModel(double s, double z, GridFunction phi) : s_(s), z_(z), phi_(std::move(phi)) {
    if (!(s >= 0.0 && s <= 1.0)) throw ModelViolation("glauber: s must lie in [0,1]");
    if (!(z >= 0.0) || !std::isfinite(z)) throw ModelViolation("glauber: activity z must be nonnegative");
    if (phi_.min() < 0.0) throw ModelViolation("glauber: potential must be nonnegative");
    const Grid& g = phi_.grid();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (std::abs(phi_[i] - phi_[g.negate_index(i)]) > 1e-12 * (1.0 + std::abs(phi_[i])))
        throw ModelViolation("glauber: potential must be symmetric");
  }

  double s() const { return s_; }
  double z() const { return z_; }
  const GridFunction& phi() const { return phi_; }
  double phi_bar() const { return phi_.max(); }
  const Grid& grid() const { return phi_.grid(); }
  std::string name() const { return "glauber"; }

  RenormalizedKernel death_kernel(KernelScaling sc) const {
    return RenormalizedKernel::exponential(1.0, s_, phi_, sc);
  }
  RenormalizedKernel birth_kernel(KernelScaling sc) const {
    return RenormalizedKernel::exponential(z_, s_ - 1.0, phi_, sc);
  }

  std::optional<std::size_t> kernel_support_bound() const {
    if (phi_.abs_max() == 0.0) return 0;
    return std::nullopt;
  }

  GrowthConstants growth_constants(double /*C*/) const { return {1.0, 0, std::exp(s_ * phi_bar())}; }

  /// Death rate at scale eps from the field U = sum phi(x - y).
  double death_from_field(double u, double eps) const { return std::exp(eps * s_ * u); }
  /// Generator birth density eps^{-1} b_eps(x, xi) from the field.
  double birth_density_from_field(double u, double eps) const { return z_ / eps * std::exp(eps * (s_ - 1.0) * u); }

private:
  double s_, z_;
  GridFunction phi_;
};

/// Plant-ecology model: d = m + kappa^- sum a^-, b = kappa + kappa^+ sum a^+.
class BdlpModel : public KernelModel<BdlpModel> {
public:
  struct Params {
    double m = 1.0;
    double kappa_minus = 0.0;
    double kappa_plus = 0.0;
    /// Immigration intensity; nonzero only for the modified model.
    double kappa = 0.0;
    bool modified = false;
  };

  BdlpModel(Params p, GridFunction a_minus, GridFunction a_plus)
      : p_(p), a_minus_(std::move(a_minus)), a_plus_(std::move(a_plus)) {
    if (!(p_.m > 0.0) || !std::isfinite(p_.m)) throw ModelViolation("bdlp: mortality m must be positive");
    if (!(p_.kappa_minus >= 0.0) || !(p_.kappa_plus >= 0.0) || !(p_.kappa >= 0.0))
      throw ModelViolation("bdlp: rates must be nonnegative");
    if (!p_.modified && p_.kappa != 0.0) throw ModelViolation("bdlp: immigration requires the modified model");
    if (!(a_minus_.grid() == a_plus_.grid())) throw ModelViolation("bdlp: kernels must share a grid");
    for (const GridFunction* a : {&a_minus_, &a_plus_}) {
      if (a->min() < 0.0) throw ModelViolation("bdlp: kernels must be nonnegative");
      if (std::abs(a->integral() - 1.0) > 1e-9) throw ModelViolation("bdlp: kernels must integrate to 1");
    }
  }

  const Params& params() const { return p_; }
  double m() const { return p_.m; }
  double kappa_minus() const { return p_.kappa_minus; }
  double kappa_plus() const { return p_.kappa_plus; }
  double kappa() const { return p_.kappa; }
  bool modified() const { return p_.modified; }
  const GridFunction& a_minus() const { return a_minus_; }
  const GridFunction& a_plus() const { return a_plus_; }
  const Grid& grid() const { return a_minus_.grid(); }
  std::string name() const { return p_.modified ? "bdlp_modified" : "bdlp"; }

  RenormalizedKernel death_kernel(KernelScaling sc) const {
    return RenormalizedKernel::affine(p_.m, p_.kappa_minus, a_minus_, sc);
  }
  RenormalizedKernel birth_kernel(KernelScaling sc) const {
    return RenormalizedKernel::affine(p_.kappa, p_.kappa_plus, a_plus_, sc);
  }

  std::optional<std::size_t> kernel_support_bound() const { return 1; }

  /// N = 1, nu = 1, A = m(1 + A^-/(4C)); falls back to max(m, kappa^- A^-) when 4 kappa^- C >= m.
  GrowthConstants growth_constants(double C) const {
    double amax = a_minus_.max();
    if (4.0 * p_.kappa_minus * C < p_.m) return {p_.m * (1.0 + amax / (4.0 * C)), 1, 1.0};
    return {std::max(p_.m, p_.kappa_minus * amax), 1, 1.0};
  }

  double death_from_field(double u, double eps) const { return p_.m + eps * p_.kappa_minus * u; }
  double birth_density_from_field(double u, double eps) const { return p_.kappa / eps + p_.kappa_plus * u; }

private:
  Params p_;
  GridFunction a_minus_, a_plus_;
};

using AnyModel = std::variant<GlauberModel, BdlpModel>;

template <class M>
concept RateModel = requires(const M& m, KernelScaling sc, const Point& x, PointSpan xi, double c) {
  { m.grid() } -> std::convertible_to<const Grid&>;
  { m.death_kernel(sc) } -> std::same_as<RenormalizedKernel>;
  { m.birth_kernel(sc) } -> std::same_as<RenormalizedKernel>;
  { m.death(x, xi) } -> std::same_as<double>;
  { m.birth(x, xi) } -> std::same_as<double>;
  { m.growth_constants(c) } -> std::same_as<GrowthConstants>;
};

static_assert(RateModel<GlauberModel>);
static_assert(RateModel<BdlpModel>);

inline const Grid& grid_of(const AnyModel& m) {
  return std::visit([](const auto& x) -> const Grid& { return x.grid(); }, m);
}

inline std::string name_of(const AnyModel& m) {
  return std::visit([](const auto& x) { return x.name(); }, m);
}

}  // namespace sbd::models
