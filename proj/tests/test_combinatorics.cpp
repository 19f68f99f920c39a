#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sbd/combinatorics.hpp"

using namespace sbd;
using namespace sbd::combinatorics;

namespace {

std::mt19937_64& rng() {
  static std::mt19937_64 r(20240601);
  return r;
}

double uni(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng()); }

FiniteConfiguration random_config(std::size_t n, double L = 5.0) {
  std::vector<Point> pts;
  while (pts.size() < n) {
    Point p{uni(0, L), uni(0, L)};
    if (std::find(pts.begin(), pts.end(), p) == pts.end()) pts.push_back(p);
  }
  return FiniteConfiguration(pts);
}

/// A permutation-invariant random set function: a random symmetric polynomial of the points.
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

}  // namespace

TEST(FiniteConfiguration, KeepsCanonicalOrderAndRejectsDuplicates) {
  FiniteConfiguration c({{2.0, 0.0}, {1.0, 0.0}, {1.0, -1.0}});
  EXPECT_EQ(c.size(), 3u);
  EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
  std::size_t pos = c.insert({1.5, 0.0});
  EXPECT_EQ(pos, 2u);
  EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
  EXPECT_THROW(c.insert({1.5, 0.0}), InvalidConfiguration);
  c.erase(0);
  EXPECT_EQ(c.size(), 3u);
  EXPECT_THROW(FiniteConfiguration({{1.0, 0.0}, {1.0, 0.0}}), InvalidConfiguration);
}

TEST(KTransform, UnitStarGivesOne) {
  for (std::size_t n = 0; n <= 6; ++n) EXPECT_DOUBLE_EQ(k_transform(unit_star(), random_config(n)), 1.0);
}

TEST(KTransform, SingletonIndicatorCountsPoints) {
  SetFunction g{[](PointSpan e) { return e.size() == 1 ? 1.0 : 0.0; }, std::nullopt};
  EXPECT_DOUBLE_EQ(k_transform(g, random_config(3)), 3.0);
}

TEST(KTransform, CoherentStateShiftsByOne) {
  auto f = [](const Point& p) { return 0.3 * std::sin(p[0]) - 0.2 * p[1]; };
  auto fp1 = [&](const Point& p) { return f(p) + 1.0; };
  for (int trial = 0; trial < 50; ++trial) {
    auto eta = random_config(static_cast<std::size_t>(trial % 7));
    EXPECT_NEAR(k_transform(coherent(f), eta), coherent_state(fp1, eta.span()), 1e-12);
    EXPECT_NEAR(k_inverse(coherent(fp1), eta), coherent_state(f, eta.span()), 1e-12);
  }
}

TEST(KTransform, InverseOfOneIsUnitStar) {
  SetFunction one{[](PointSpan) { return 1.0; }, std::nullopt};
  EXPECT_DOUBLE_EQ(k_inverse(one, {}), 1.0);
  for (std::size_t n = 1; n <= 6; ++n) EXPECT_DOUBLE_EQ(k_inverse(one, random_config(n)), 0.0);
}

TEST(KTransform, InverseAgreesWithIndependentMoebiusSum) {
  for (int trial = 0; trial < 40; ++trial) {
    SetFunction f = random_set_function();
    auto eta = random_config(static_cast<std::size_t>(trial % 7));
    double ref = oracle::moebius(eta.points(), [&](const oracle::PtSet& xi) {
      std::vector<Point> v(xi.begin(), xi.end());
      std::sort(v.begin(), v.end());
      return f(PointSpan(v));
    });
    EXPECT_NEAR(k_inverse(f, eta), ref, 1e-12 * (1.0 + std::abs(ref)));
  }
}

TEST(KTransform, RoundTripIsIdentityProperty) {
  for (int trial = 0; trial < 200; ++trial) {
    std::optional<std::size_t> bound;
    if (trial % 3 == 0) bound = static_cast<std::size_t>(trial % 7);
    SetFunction g = random_set_function(bound);
    SetFunction kg{[&](PointSpan e) { return k_transform(g, FiniteConfiguration(std::vector<Point>(e.begin(), e.end()))); },
                   std::nullopt};
    auto eta = random_config(static_cast<std::size_t>(trial % 7));
    EXPECT_NEAR(k_inverse(kg, eta), g(eta), 1e-12 * (1.0 + std::abs(g(eta))));
  }
}

TEST(KTransform, SizeLimitIsEnforced) {
  EXPECT_THROW(k_transform(unit_star(), random_config(21)), SizeError);
  EXPECT_THROW(k_inverse(unit_star(), random_config(21)), SizeError);
  EXPECT_THROW(star_convolution(unit_star(), unit_star(), random_config(13)), SizeError);
}

TEST(StarConvolution, UnitStarIsNeutralPair) {
  for (std::size_t n = 0; n <= 5; ++n) {
    auto eta = random_config(n);
    EXPECT_DOUBLE_EQ(star_convolution(unit_star(), unit_star(), eta), n == 0 ? 1.0 : 0.0);
  }
}

TEST(StarConvolution, BothFormsAgree) {
  for (int trial = 0; trial < 60; ++trial) {
    SetFunction g1 = random_set_function(), g2 = random_set_function();
    auto eta = random_config(static_cast<std::size_t>(trial % 6));
    double a = star_convolution(g1, g2, eta);
    double b = star_convolution_regrouped(g1, g2, eta);
    EXPECT_NEAR(a, b, 1e-12 * (1.0 + std::abs(a)));
  }
}

TEST(StarConvolution, KTransformIsMultiplicative) {
  for (int trial = 0; trial < 40; ++trial) {
    SetFunction g1 = random_set_function(), g2 = random_set_function();
    auto eta = random_config(static_cast<std::size_t>(trial % 6));
    SetFunction conv{[&](PointSpan e) {
                       return star_convolution(g1, g2, FiniteConfiguration(std::vector<Point>(e.begin(), e.end())));
                     },
                     std::nullopt};
    // Brute-force K of the product side by explicit subset enumeration.
    double lhs = 0.0, k1 = 0.0, k2 = 0.0;
    oracle::PtSet cur;
    oracle::subsets(eta.points(), 0, cur, [&](const oracle::PtSet& xi) {
      std::vector<Point> v(xi.begin(), xi.end());
      std::sort(v.begin(), v.end());
      lhs += conv(PointSpan(v));
      k1 += g1(PointSpan(v));
      k2 += g2(PointSpan(v));
    });
    EXPECT_NEAR(lhs, k1 * k2, 1e-10 * (1.0 + std::abs(lhs)));
  }
}

TEST(CoherentState, EmptyAndConstant) {
  auto c = [](const Point&) { return 1.7; };
  EXPECT_DOUBLE_EQ(coherent_state(c, {}), 1.0);
  auto eta = random_config(4);
  EXPECT_NEAR(coherent_state(c, eta.span()), std::pow(1.7, 4), 1e-14);
}

TEST(LpIntegral, UnitStarIsOne) {
  QuadratureScheme s{Grid(Torus(1, 2.0), 16), 3};
  EXPECT_DOUBLE_EQ(lp_integral(unit_star(), 2.5, s).value, 1.0);
}

TEST(LpIntegral, SingleLayerIsIntegral) {
  Grid g(Torus(1, 3.0), 30);
  auto gx = [](const Point& p) { return std::cos(p[0]) + 2.0; };
  SetFunction h{[&](PointSpan e) { return e.size() == 1 ? gx(e[0]) : 0.0; }, 1};
  QuadratureScheme s{g, 12};
  double ref = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) ref += g.weight() * gx(g.node(i));
  LpResult r = lp_integral(h, 1.0, s);
  EXPECT_NEAR(r.value, ref, 1e-12);
  EXPECT_EQ(r.tail_estimate, 0.0);
  EXPECT_EQ(r.layers.size(), 2u);
}

TEST(LpIntegral, BruteForceMatchesCoherentLayerFormula) {
  Grid g(Torus(1, 2.0), 6);
  GridFunction f = GridFunction::sample(g, [](const Point& p) { return 0.4 * std::sin(p[0]) + 0.3; });
  QuadratureScheme s{g, 5};
  double brute = lp_integral(coherent([&](const Point& p) { return f(p); }), 1.3, s).value;
  double layered = lp_integral(CoherentState{1.0, f}, 1.3, s).value;
  EXPECT_NEAR(brute, layered, 1e-12);
}

TEST(LpIntegral, CoherentStateReproducesExponentialOfIntegral) {
  Grid g(Torus(1, 2.0), 64);
  GridFunction f = GridFunction::sample(g, [](const Point& p) { return 0.5 + 0.4 * std::cos(M_PI * p[0]); });
  LpResult r = lp_integral(CoherentState{1.0, f}, 1.0, QuadratureScheme{g, 12});
  double exact = std::exp(f.integral());
  EXPECT_LT(std::abs(r.value - exact) / exact, 1e-6);
  EXPECT_GT(r.tail_estimate, 0.0);
}

TEST(LpIntegral, BudgetIsEnforced) {
  QuadratureScheme s{Grid(Torus(1, 1.0), 64), 12};
  EXPECT_THROW(lp_integral(coherent([](const Point&) { return 1.0; }), 1.0, s), SizeError);
}

TEST(Minlos, ZeroFunctionHasZeroResidual) {
  Grid g(Torus(1, 1.0), 4);
  EXPECT_EQ(minlos_check([](PointSpan, PointSpan, PointSpan) { return 0.0; }, g, 3), 0.0);
}

TEST(Minlos, SeparableFamilyMatchesClosedForm) {
  Grid g(Torus(1, 1.5), 6);
  auto f = [](const Point& p) { return 0.5 + 0.2 * std::sin(p[0]); };
  auto h = [](const Point& p) { return 0.3 * std::cos(2.0 * p[0]); };
  TripleSetFunction H = [&](PointSpan a, PointSpan b, PointSpan) {
    return coherent_state(f, a) * coherent_state(h, b);
  };
  EXPECT_LT(minlos_check(H, g, 4), 1e-8);
}

TEST(Minlos, RandomSeparableWithJointFactor) {
  for (int trial = 0; trial < 5; ++trial) {
    Grid g(Torus(1, 1.0 + trial * 0.3), 5);
    double a = uni(-1, 1), b = uni(-1, 1), c = uni(-0.5, 0.5);
    auto f = [&](const Point& p) { return a + 0.5 * std::sin(p[0]); };
    auto h = [&](const Point& p) { return b * std::cos(p[0]); };
    auto w = [&](const Point& p) { return 1.0 + c * p[0]; };
    TripleSetFunction H = [&](PointSpan x, PointSpan y, PointSpan u) {
      return coherent_state(f, x) * coherent_state(h, y) * coherent_state(w, u) * (1.0 + 0.1 * x.size());
    };
    EXPECT_LT(minlos_check(H, g, 3), 1e-8);
  }
}
