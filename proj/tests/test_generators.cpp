#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dynrisk/generators.hpp"
#include "dynrisk/stats.hpp"

using namespace dynrisk;

namespace {

// sup over a (y, r) grid of -beta y + r q - g(y, r); r is |z| since every kind is radial.
double brute_conjugate(const GeneratorSpec& g, double beta, double q) {
  double best = -kInfinity;
  for (int iy = -200; iy <= 200; ++iy) {
    const double y = iy * 0.025;
    for (int ir = 0; ir <= 4000; ++ir) {
      const double r = ir * 0.0025;
      best = std::max(best, -beta * y + r * q - g.at(y, r));
    }
  }
  return best;
}

std::vector<GeneratorSpec> corpus() {
  return {entropic(),
          lipschitz_z(0.5),
          lipschitz_z(2.0),
          quadratic(0.0, 0.0, 0.25),
          quadratic(1.0, 0.5, 1.0),
          superquadratic_power(2.0),
          superquadratic_power(3.0, 0.5),
          cap_at_horizon(superquadratic_power(2.0), 1.0),
          cap_generator(entropic(), 3.0)};
}

}  // namespace

TEST(Generators, ConjugateMatchesBruteForce) {
  struct Case {
    GeneratorSpec g;
    double beta, q;
  };
  const std::vector<Case> cases{{entropic(), 0.0, 1.3},
                                {quadratic(0.5, 0.0, 0.25), 0.0, 0.8},
                                {quadratic(1.0, 0.5, 1.0), 0.25, 1.7},
                                {quadratic(1.0, 0.5, 1.0), 0.5, 0.4},
                                {superquadratic_power(2.0), 0.0, 2.0},
                                {superquadratic_power(3.0), 0.0, 1.5},
                                {lipschitz_z(2.0), 0.0, 1.5}};
  for (const auto& c : cases) {
    const double exact = c.g.conjugate_norm(c.beta, c.q);
    EXPECT_NEAR(exact, brute_conjugate(c.g, c.beta, c.q), 2e-3) << c.g.describe() << " q=" << c.q;
  }
}

TEST(Generators, ConjugateClosedForms) {
  EXPECT_DOUBLE_EQ(entropic().conjugate_norm(0.0, 2.0), 2.0);
  EXPECT_EQ(entropic().conjugate_norm(0.1, 2.0), kInfinity);
  EXPECT_DOUBLE_EQ(quadratic(1.0, 0.5, 0.5).conjugate_norm(0.3, 1.0), 0.5 - 1.0);
  EXPECT_EQ(quadratic(1.0, 0.5, 0.5).conjugate_norm(0.6, 1.0), kInfinity);
  EXPECT_DOUBLE_EQ(lipschitz_z(1.0).conjugate_norm(0.0, 1.0), 0.0);
  EXPECT_EQ(lipschitz_z(1.0).conjugate_norm(0.0, 1.0001), kInfinity);
  // The frozen cap is bounded in z, so only q = 0 has a finite conjugate.
  const auto capped = cap_at_horizon(superquadratic_power(2.0), 1.0);
  EXPECT_EQ(capped.conjugate_norm(0.0, 0.1), kInfinity);
  EXPECT_DOUBLE_EQ(capped.conjugate_norm(0.0, 0.0), 0.0);
  const std::vector<double> q{0.6, 0.8};
  EXPECT_DOUBLE_EQ(entropic().conjugate(0.0, q), 0.5);
}

TEST(Generators, StructuralInvariantsOnSamples) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (const auto& g : corpus()) {
    for (int i = 0; i < 1000; ++i) {
      const double y = u(rng), y2 = y + std::abs(u(rng));
      const std::vector<double> z{u(rng), u(rng)};
      const double gz = g.evaluate(0.0, y, z);
      ASSERT_GE(gz, 0.0) << g.describe();
      ASSERT_GE(gz + 1e-12, g.evaluate(0.0, y2, z)) << g.describe() << " not decreasing in y";
    }
  }
}

TEST(Generators, JointConvexityMidpointTest) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  // The frozen cap is excluded: it is constant in |z| beyond its radius and therefore not convex.
  for (const auto& g : {entropic(), lipschitz_z(1.0), quadratic(1.0, 0.5, 1.0), superquadratic_power(2.0),
                        superquadratic_power(3.0, 0.5)}) {
    for (int i = 0; i < 1000; ++i) {
      const double y1 = u(rng), y2 = u(rng);
      const std::vector<double> z1{u(rng), u(rng)}, z2{u(rng), u(rng)};
      const std::vector<double> zm{0.5 * (z1[0] + z2[0]), 0.5 * (z1[1] + z2[1])};
      const double mid = g.evaluate(0.0, 0.5 * (y1 + y2), zm);
      ASSERT_LE(mid, 0.5 * (g.evaluate(0.0, y1, z1) + g.evaluate(0.0, y2, z2)) + 1e-12) << g.describe();
    }
  }
}

TEST(Generators, FrozenCapIsNotConvexBeyondRadius) {
  const auto capped = cap_generator(superquadratic_power(2.0), 1.0);
  // |z| in {0.5, 1.5}: chord (0.125 + 1) / 2 = 0.5625 versus value at 1.0 of 1.0.
  EXPECT_GT(capped.at(0.0, 1.0), 0.5 * (capped.at(0.0, 0.5) + capped.at(0.0, 1.5)));
}

TEST(Generators, QuadraticGrowthBoundHolds) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (const auto& g : corpus()) {
    const auto gr = g.growth();
    if (!std::isfinite(gr.c)) continue;
    for (int i = 0; i < 1000; ++i) {
      const double y = u(rng), r = std::abs(u(rng)) * 2;
      ASSERT_LE(g.at(y, r), gr.a + gr.b * std::abs(y) + gr.c * r * r + 1e-12) << g.describe();
    }
  }
}

TEST(Generators, SuperquadraticNormalizedAndCapConstant) {
  const auto g = superquadratic_power(2.0);
  EXPECT_EQ(g.at(0.0, 0.0), 0.0);
  EXPECT_NEAR(g.at(0.0, 2.0), 8.0 / 3.0, 1e-14);
  EXPECT_EQ(g.growth().c, kInfinity);
  EXPECT_FALSE(g.depends_on_y());
  const double e = std::exp(1.0);
  EXPECT_NEAR(cap_radius(1.0), e, 1e-15);
  const auto capped = cap_at_horizon(g, 1.0);
  EXPECT_NEAR(capped.growth().c, 3 * e * e, 1e-12);
  EXPECT_NEAR(capped.z_lipschitz(), 3 * e * e, 1e-12);
  // Agrees with the envelope phi(|z|)|z| inside the radius and is frozen outside.
  EXPECT_NEAR(capped.at(0.0, 1.5), 1.5 * 1.5 * 1.5, 1e-12);
  EXPECT_NEAR(capped.at(0.0, 10.0), e * e * e, 1e-12);
  // p = 3: phi(K) + K theta(K) = K^3 + 3 K^3.
  EXPECT_NEAR(cap_at_horizon(superquadratic_power(3.0), 1.0).growth().c, 4 * e * e * e, 1e-11);
  EXPECT_THROW(superquadratic_power(0.5), std::domain_error);
}

TEST(Generators, BoundFunctions) {
  const auto l = quadratic_growth_bound(1.0, 0.0, 0.5, 2.0);
  EXPECT_DOUBLE_EQ(l(0.0), 2.0);
  EXPECT_DOUBLE_EQ(l(2.0), 0.5 * 2.0 * 4.0 + 2.0);
  const auto lb = quadratic_growth_bound(1.0, 0.5, 1.0, 1.0);
  EXPECT_NEAR(lb.quad_coef, std::exp(0.5), 1e-15);
  EXPECT_NEAR(lb.a_coef, 2 * (std::exp(0.5) - 1), 1e-15);
  const auto k = kappa_bound(2.0, 1.0);
  EXPECT_DOUBLE_EQ(k(3.0), 2.0 * (9.0 + 1.0));
  const auto sq = bound_function(BoundSource::CappedSuperquadratic, superquadratic_power(2.0), 1.0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(sq(1.0), 3 * e * e, 1e-12);
  EXPECT_EQ(bound_function(BoundSource::QuadraticGrowth, entropic(), 1.0)(2.0), 2.0);
  EXPECT_THROW(bound_function(BoundSource::QuadraticGrowth, superquadratic_power(2.0), 1.0), std::invalid_argument);
  EXPECT_THROW(bound_function(BoundSource::KappaDominated, quadratic(0, 1, 0), 1.0), std::invalid_argument);
  EXPECT_EQ(parse_bound_source("kappa_dominated"), BoundSource::KappaDominated);
  EXPECT_THROW(parse_bound_source("nope"), std::invalid_argument);
}

TEST(Generators, ConjugateOfBoundAgainstNumericSup) {
  const auto l = quadratic_growth_bound(0.5, 0.0, 0.75, 1.0);
  for (double r : {0.0, 0.4, 1.0, 3.0}) {
    double best = -kInfinity;
    for (int i = 0; i <= 200000; ++i) {
      const double lam = i * 1e-4;
      best = std::max(best, lam * r - l(lam));
    }
    EXPECT_NEAR(conjugate_of_bound_raw(l, r), best, 1e-6);
    EXPECT_NEAR(conjugate_of_bound(l, r), std::max(0.0, best), 1e-6);
  }
  for (double y : {0.1, 1.0, 4.0}) {
    const double r = inverse_conjugate_of_bound(l, y);
    EXPECT_NEAR(conjugate_of_bound(l, r), y, 1e-12);
    EXPECT_LT(conjugate_of_bound(l, r * 0.999), y);
  }
}
