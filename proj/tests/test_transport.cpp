#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "dynrisk/transport.hpp"

using namespace dynrisk;

namespace {

// 1-d W1 = integral of |F - G| over the merged support.
double cdf_w1(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  std::vector<double> xs = mu.points();
  xs.insert(xs.end(), nu.points().begin(), nu.points().end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  auto cdf = [](const DiscreteMeasure& m, double x) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (*m.point(i) <= x) s += m.weight(i);
    return s;
  };
  double w = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) w += std::abs(cdf(mu, xs[i]) - cdf(nu, xs[i])) * (xs[i + 1] - xs[i]);
  return w;
}

// Uniform measures with n atoms each: W1 is the best assignment, found by trying every permutation.
double assignment_w1(const std::vector<double>& a, const std::vector<double>& b, std::size_t d) {
  const std::size_t n = a.size() / d;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = kInfinity;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += std::pow(a[i * d + k] - b[perm[i] * d + k], 2);
      c += std::sqrt(s);
    }
    best = std::min(best, c / n);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

DiscreteMeasure random_measure(std::mt19937_64& rng, std::size_t atoms) {
  std::uniform_real_distribution<double> u(-2.0, 2.0), w(0.1, 1.0);
  std::vector<double> p(atoms), q(atoms);
  for (auto& x : p) x = u(rng);
  for (auto& x : q) x = w(rng);
  const double s = std::accumulate(q.begin(), q.end(), 0.0);
  for (auto& x : q) x /= s;
  return DiscreteMeasure(1, p, q);
}

}  // namespace

TEST(Measure, MergesDuplicatesAndValidates) {
  const DiscreteMeasure m(1, {0.0, 1.0, 0.0}, {0.25, 0.5, 0.25});
  EXPECT_EQ(m.size(), 2u);
  EXPECT_THROW(DiscreteMeasure(1, {0.0, 1.0}, {0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(DiscreteMeasure(1, {0.0}, {-1.0}), std::invalid_argument);
  EXPECT_NEAR(m.integrate([](const double* x) { return x[0]; }), 0.5, 1e-15);
}

TEST(W1, MatchesCdfFormulaIn1d) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 30; ++t) {
    const auto mu = random_measure(rng, 2 + t % 7), nu = random_measure(rng, 3 + t % 5);
    EXPECT_NEAR(wasserstein1(mu, nu).cost, cdf_w1(mu, nu), 1e-10);
  }
}

TEST(W1, MatchesBruteForceAssignmentIn2d) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 6;
    std::vector<double> a(2 * n), b(2 * n);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    const std::vector<double> w(n, 1.0 / n);
    const auto plan = wasserstein1(DiscreteMeasure(2, a, w), DiscreteMeasure(2, b, w));
    EXPECT_NEAR(plan.cost, assignment_w1(a, b, 2), 1e-10);
    double mass = 0.0;
    for (const auto& c : plan.coupling) mass += c.mass;
    EXPECT_NEAR(mass, 1.0, 1e-12);
  }
}

TEST(W1, DiracsAndIdentity) {
  EXPECT_NEAR(wasserstein1(DiscreteMeasure::dirac({0.0, 0.0}), DiscreteMeasure::dirac({3.0, 4.0})).cost, 5.0, 1e-14);
  std::mt19937_64 rng(3);
  const auto mu = random_measure(rng, 5);
  EXPECT_NEAR(wasserstein1(mu, mu).cost, 0.0, 1e-14);
}

TEST(Kl, DiscreteDivergence) {
  const DiscreteMeasure mu(1, {0.0, 1.0}, {0.5, 0.5}), nu(1, {0.0, 1.0}, {0.25, 0.75});
  EXPECT_NEAR(kl_divergence(mu, nu), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-15);
  EXPECT_EQ(kl_divergence(mu, DiscreteMeasure::dirac({0.0})), kInfinity);
}

TEST(Quantization, MidpointsAndPerturbations) {
  const auto q = gaussian_quantization(512);
  EXPECT_EQ(q.size(), 512u);
  EXPECT_NEAR(q.integrate([](const double* x) { return x[0]; }), 0.0, 1e-12);
  EXPECT_NEAR(q.integrate([](const double* x) { return x[0] * x[0]; }), 1.0, 0.01);
  EXPECT_EQ(gaussian_quantization(8, 2).size(), 64u);
  EXPECT_EQ(default_quantization(1), 512u);
  // A mean shift of the reference pushed onto the grid.
  const auto shifted = perturbed_gaussian(512, {0.5}, {1.0});
  EXPECT_NEAR(kl_divergence(shifted, q), gaussian_kl(0.5, 1.0), 0.01);
  EXPECT_NEAR(wasserstein1(shifted, q).cost, gaussian_w1(0.5, 1.0), 0.01);
}

TEST(Quantization, GaussianClosedForms) {
  EXPECT_DOUBLE_EQ(gaussian_kl(0.5, 1.0), 0.125);
  EXPECT_DOUBLE_EQ(gaussian_w1(-0.7, 1.0), 0.7);
  // Pure scale: W1(N(0,s^2), N(0,1)) = |s - 1| E|N| = |s - 1| sqrt(2/pi).
  EXPECT_NEAR(gaussian_w1(0.0, 1.5), 0.5 * std::sqrt(2 / M_PI), 1e-12);
}

TEST(T1, HoldsOnPerturbationsAndIsTightForMeanShift) {
  const auto ref = gaussian_quantization(512);
  const double budget = quantization_budget(512);
  EXPECT_GT(budget, 0.0);
  EXPECT_LT(budget, 0.1);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> m(-1.0, 1.0), s(0.6, 1.6);
  for (int i = 0; i < 10; ++i) {
    const auto r = check_t1(perturbed_gaussian(512, {m(rng)}, {s(rng)}), ref, budget);
    EXPECT_TRUE(r.pass) << r.margin;
  }
  const auto shift = check_t1(perturbed_gaussian(512, {0.5}, {1.0}), ref, budget);
  EXPECT_NEAR(shift.h_w1, shift.kl, budget);
}

TEST(KantorovichRubinstein, SlopeSignFamilyIsExactIn1d) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 20; ++t) {
    const auto mu = random_measure(rng, 2 + t % 4), nu = random_measure(rng, 2 + (t + 1) % 4);
    std::vector<double> support = mu.points();
    support.insert(support.end(), nu.points().begin(), nu.points().end());
    const auto exact = kantorovich_rubinstein_gap(mu, nu, slope_sign_family(support));
    EXPECT_NEAR(exact.gap, 0.0, 1e-9);
    const auto cones = kantorovich_rubinstein_gap(mu, nu, cone_family(support));
    EXPECT_TRUE(cones.lower_bound_holds);
    EXPECT_GE(cones.gap, -1e-9);
  }
}

TEST(KantorovichRubinstein, RejectsNonLipschitzFamilies) {
  const DiscreteMeasure mu(1, {0.0}, {1.0}), nu(1, {1.0}, {1.0});
  std::vector<TestFunction> bad{{"twice", [](const double* x) { return 2 * x[0]; }}};
  EXPECT_THROW(kantorovich_rubinstein_gap(mu, nu, bad), std::invalid_argument);
}

TEST(TransportInequality, EntropicUnitTiltIsEquality) {
  // For entropic g and q = 1: alpha = T/2, W1 lower estimate from W_T is 1, l*(1) = 1/2.
  const TimeGrid g(1.0, 2);
  const auto b = simulate(g, 1, 100000, 15);
  const auto l = quadratic_growth_bound(0.0, 0.0, 0.5, 1.0);
  const auto r = transport_inequality_check(entropic(), l, {TiltSpec::constant(g, {1.0})},
                                            {terminal_claim(), negated(terminal_claim())}, b);
  ASSERT_EQ(r.entries.size(), 1u);
  const auto& e = r.entries[0];
  EXPECT_DOUBLE_EQ(e.alpha, 0.5);
  EXPECT_NEAR(e.lstar, e.alpha, 3 * e.error + 1e-12);
  EXPECT_TRUE(r.pass);
}
