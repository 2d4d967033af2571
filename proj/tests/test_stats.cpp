#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dynrisk/stats.hpp"

using namespace dynrisk;

TEST(Stats, MeanVarianceAndStandardError) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(mean(xs), 2.5);
  EXPECT_DOUBLE_EQ(variance(xs), 5.0 / 3.0);
  const auto e = mean_estimate(xs);
  EXPECT_DOUBLE_EQ(e.value, 2.5);
  EXPECT_DOUBLE_EQ(e.error, std::sqrt(5.0 / 3.0 / 4.0));
  EXPECT_EQ(variance(std::vector<double>{7.0}), 0.0);
}

TEST(Stats, CombineErrorsIsRootSumSquare) {
  EXPECT_DOUBLE_EQ(combine_errors(3.0, 4.0), 5.0);
  EXPECT_DOUBLE_EQ(combine_errors(1.0, 2.0, 2.0), 3.0);
}

TEST(Stats, NormalFunctionsAgreeWithErfc) {
  for (double x : {-4.0, -1.3, 0.0, 0.7, 2.0, 5.5}) {
    EXPECT_NEAR(normal_cdf(x), 0.5 * std::erfc(-x / std::sqrt(2.0)), 1e-15);
    EXPECT_NEAR(normal_survival(x), 0.5 * std::erfc(x / std::sqrt(2.0)), 1e-15);
  }
  EXPECT_NEAR(normal_survival(2.0), 0.022750131948179, 1e-12);
  for (double p : {1e-9, 0.01, 0.3, 0.5, 0.975, 1 - 1e-9}) EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-12 * (1 + 1 / p));
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
}

TEST(Stats, WilsonIntervalMatchesHandComputation) {
  // 20 of 100 at z = 1.96: centre (0.2 + z^2/200) / (1 + z^2/100), half-width z sqrt(0.0016 + z^2/40000) / (1 + z^2/100).
  const double z = 1.959963984540054;
  const double denom = 1 + z * z / 100;
  const double centre = (0.2 + z * z / 200) / denom;
  const double half = z * std::sqrt(0.2 * 0.8 / 100 + z * z / 40000) / denom;
  const auto ci = wilson_interval(20, 100);
  EXPECT_NEAR(ci.lower, centre - half, 1e-14);
  EXPECT_NEAR(ci.upper, centre + half, 1e-14);
  const auto none = wilson_interval(0, 50);
  EXPECT_NEAR(none.lower, 0.0, 1e-15);
  EXPECT_GT(none.upper, 0.0);
}

TEST(Stats, OrderStatisticsAndMedianInterval) {
  std::vector<double> xs{5, 1, 4, 2, 3};
  EXPECT_EQ(order_statistic(xs, 0), 1.0);
  EXPECT_EQ(order_statistic(xs, 4), 5.0);
  EXPECT_EQ(sample_median(xs), 3.0);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  std::vector<double> big(20001);
  for (auto& v : big) v = n01(rng);
  const auto ci = median_interval(big);
  EXPECT_LE(ci.lower, sample_median(big));
  EXPECT_GE(ci.upper, sample_median(big));
  // Asymptotic half-width z sqrt(pi/2) / sqrt(M) for the standard normal median.
  EXPECT_NEAR(ci.upper - ci.lower, 2 * 1.96 * std::sqrt(M_PI / 2 / 20001.0), 0.01);
}

TEST(Stats, MedianIntervalCoverage) {
  // The order-statistic interval is distribution free: check coverage on exponential samples.
  std::mt19937_64 rng(11);
  std::exponential_distribution<double> ex(1.0);
  const double true_median = std::log(2.0);
  int covered = 0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> xs(301);
    for (auto& v : xs) v = ex(rng);
    const auto ci = median_interval(xs);
    covered += ci.lower <= true_median && true_median <= ci.upper;
  }
  EXPECT_GT(covered, 0.92 * reps);
}

TEST(Stats, VerdictBands) {
  EXPECT_EQ(classify(0.1, 1.0), Verdict::Pass);
  EXPECT_EQ(classify(-2.9, 1.0), Verdict::Pass);
  EXPECT_EQ(classify(-4.0, 1.0), Verdict::Inconclusive);
  EXPECT_EQ(classify(-5.1, 1.0), Verdict::Violation);
  EXPECT_EQ(classify(-1e-3, 0.0), Verdict::Violation);
  EXPECT_EQ(confirm(Verdict::Violation, Verdict::Violation), Verdict::Violation);
  EXPECT_EQ(confirm(Verdict::Violation, Verdict::Pass), Verdict::Inconclusive);
  EXPECT_EQ(confirm(Verdict::Pass, Verdict::Violation), Verdict::Pass);
  EXPECT_EQ(to_string(Verdict::Violation), "VIOLATION");
}

TEST(Stats, RegressionSlope) {
  const std::vector<double> x{0, 1, 2, 3};
  const std::vector<double> y{1, 3, 5, 7};
  EXPECT_NEAR(regression_slope(x, y), 2.0, 1e-14);
}
