#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "dynrisk/stochastics.hpp"

using namespace dynrisk;

TEST(TimeGrid, DyadicNodes) {
  const TimeGrid g(2.0, 3);
  EXPECT_EQ(g.cells(), 8u);
  EXPECT_DOUBLE_EQ(g.step(), 0.25);
  EXPECT_DOUBLE_EQ(g.time(8), 2.0);
  EXPECT_EQ(g.times().size(), 9u);
  EXPECT_THROW(TimeGrid(0.0, 2), std::exception);
  EXPECT_THROW(TimeGrid(1.0, TimeGrid::kMaxLevels + 1), std::exception);
}

TEST(Simulation, IncrementMoments) {
  const TimeGrid g(1.0, 4);
  const auto b = simulate(g, 2, 50000, 17);
  const auto data = b.data();
  double s = 0, s2 = 0, s4 = 0, cross = 0;
  for (std::size_t i = 0; i < b.samples(); ++i) {
    auto p = b.path(i);
    for (std::size_t k = 0; k < g.cells(); ++k) {
      const double a = p.increment(k, 0) / std::sqrt(g.step());
      s += a;
      s2 += a * a;
      s4 += a * a * a * a;
      cross += a * p.increment(k, 1) / std::sqrt(g.step());
    }
  }
  const double n = static_cast<double>(b.samples() * g.cells());
  EXPECT_NEAR(s / n, 0.0, 5 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 5 * std::sqrt(2 / n));
  EXPECT_NEAR(s4 / n, 3.0, 5 * std::sqrt(96 / n));
  EXPECT_NEAR(cross / n, 0.0, 5 / std::sqrt(n));
  EXPECT_EQ(data.size(), b.samples() * b.row_size());
}

TEST(Simulation, DeterministicAndChunkable) {
  const TimeGrid g(1.0, 3);
  const auto a = simulate(g, 1, 1000, 5);
  const auto b = simulate(g, 1, 1000, 5);
  EXPECT_TRUE(a == b);
  const auto c = simulate(g, 1, 1000, 6);
  EXPECT_FALSE(a == c);
  // Paths 300..399 of the family are the same whether simulated alone or in the full batch.
  const auto part = simulate_range(g, 1, 300, 100, 5);
  for (std::size_t i = 0; i < 100; ++i) {
    auto x = part.increments(i);
    auto y = a.increments(300 + i);
    ASSERT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
  }
}

TEST(Simulation, CoarseningSumsIncrements) {
  const auto fine = simulate(TimeGrid(1.0, 4), 1, 200, 9);
  const auto coarse = fine.coarsened(2);
  EXPECT_EQ(coarse.grid().cells(), 4u);
  for (std::size_t i = 0; i < 200; ++i) {
    auto f = fine.increments(i);
    auto c = coarse.increments(i);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(c[k], f[4 * k] + f[4 * k + 1] + f[4 * k + 2] + f[4 * k + 3], 1e-14);
  }
}

TEST(Simulation, CoordinateBlock) {
  const auto b = simulate(TimeGrid(1.0, 2), 3, 50, 2);
  const auto blk = b.coordinate_block(1, 2);
  EXPECT_EQ(blk.dimension(), 2u);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(blk.path(i).increment(k, 1), b.path(i).increment(k, 2));
}

TEST(Claims, TerminalValueIsGaussian) {
  const auto b = simulate(TimeGrid(2.0, 3), 1, 40000, 21);
  const auto v = evaluate(terminal_claim(), b);
  const auto e = mean_estimate(v);
  EXPECT_NEAR(e.value, 0.0, 4 * e.error);
  EXPECT_NEAR(variance(v), 2.0, 0.06);
}

TEST(Claims, GridMaxMatchesSpitzerIdentity) {
  // Spitzer: E[max_{k<=N} S_k] = sum_{k=1}^N E[S_k^+] / k, with E[S_k^+] = sqrt(k dt / (2 pi)).
  const unsigned n = 6;
  const TimeGrid g(1.0, n);
  const auto b = simulate(g, 1, 100000, 33);
  const auto e = mean_estimate(evaluate(running_max_claim(), b));
  double oracle = 0.0;
  for (std::size_t k = 1; k <= g.cells(); ++k) oracle += std::sqrt(static_cast<double>(k) * g.step() / (2 * M_PI)) / k;
  EXPECT_NEAR(e.value, oracle, 4 * e.error);
  // And it approaches the continuous sqrt(2/pi) from below.
  EXPECT_LT(oracle, std::sqrt(2 / M_PI));
}

TEST(Claims, LogContractMoments) {
  const TimeGrid g(1.0, 5);
  const auto b = simulate(g, 1, 60000, 8);
  auto x = log_contract(
      2.0, [](double) { return 0.1; }, [](double) { return std::vector<double>{0.6}; }, g);
  const auto v = evaluate(x, b);
  const auto e = mean_estimate(v);
  EXPECT_NEAR(e.value, std::log(2.0) + 0.1 - 0.18, 4 * e.error);
  EXPECT_NEAR(variance(v), 0.36, 0.01);
  EXPECT_TRUE(x.in(ClaimClass::Lambda));
  EXPECT_TRUE(x.in(ClaimClass::LambdaPrime));
  EXPECT_FALSE(x.nonneg);
  EXPECT_THROW(log_contract(
                   1.0, [](double) { return 0.0; }, [](double) { return std::vector<double>{1.5}; }, g),
               std::domain_error);
}

TEST(Claims, CombinatorsTrackLipschitzAndSign) {
  const auto w = terminal_claim();
  EXPECT_TRUE(positive_part(w).nonneg);
  EXPECT_TRUE(positive_part(w).in(ClaimClass::LambdaPlus));
  EXPECT_FALSE(w.in(ClaimClass::LambdaPlus));
  EXPECT_DOUBLE_EQ(scaled(w, 2.5).lipschitz_constant, 2.5);
  EXPECT_FALSE(scaled(w, 2.5).in(ClaimClass::Lambda));
  EXPECT_DOUBLE_EQ(sum(w, running_max_claim()).lipschitz_constant, 2.0);
  EXPECT_DOUBLE_EQ(mixture(w, running_max_claim(), 0.3).lipschitz_constant, 1.0);

  const auto b = simulate(TimeGrid(1.0, 2), 1, 100, 4);
  const auto vw = evaluate(w, b);
  const auto vn = evaluate(negated(w), b);
  const auto vs = evaluate(shifted(w, 1.5), b);
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_DOUBLE_EQ(vn[i], -vw[i]);
    EXPECT_DOUBLE_EQ(vs[i], vw[i] + 1.5);
  }
}

TEST(Claims, EmpiricalLipschitzRespectsCertificate) {
  const TimeGrid g(1.0, 4);
  for (const auto& x : {terminal_claim(), running_max_claim(), abs_terminal_claim()}) {
    EXPECT_LE(empirical_lipschitz(x, ClaimClass::Lambda, g, 1, 2000, 3), x.lipschitz_constant + 1e-10) << x.name;
    EXPECT_LE(empirical_lipschitz(x, ClaimClass::LambdaPrime, g, 1, 2000, 3), x.lipschitz_constant + 1e-10) << x.name;
  }
}

TEST(Claims, BlockAverageOfTerminals) {
  const auto b = simulate(TimeGrid(1.0, 0), 4, 30000, 12);
  const auto avg = block_average(terminal_claim(), 4, 1);
  const auto v = evaluate(avg, b);
  EXPECT_NEAR(variance(v), 0.25, 0.01);
  for (std::size_t i = 0; i < 10; ++i) {
    auto p = b.path(i);
    double s = 0;
    for (std::size_t j = 0; j < 4; ++j) s += p.increment(0, j);
    EXPECT_NEAR(v[i], s / 4, 1e-14);
  }
}

TEST(Discretization, TerminalMapIsExact) {
  const auto s = discretization_error(terminal_value_map(), {2, 3, 4}, 8, 500, 1);
  for (const auto& m : s.moments) EXPECT_NEAR(m.value, 0.0, 1e-20);
}

TEST(Discretization, RunningSupConverges) {
  const auto s = discretization_error(running_sup_map(), {4, 5, 6, 7, 8}, 12, 2000, 7);
  ASSERT_EQ(s.moments.size(), 5u);
  for (std::size_t i = 1; i < s.moments.size(); ++i) EXPECT_LT(s.moments[i].value, s.moments[i - 1].value);
  EXPECT_LT(s.slope, -0.4);
}
