#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dynrisk/regression.hpp"

using namespace dynrisk;

namespace {

// RMS distance between the fitted E[W_T^2 | W_t] and the exact W_t^2 + (T - t), over paths.
double fit_error(const RegressionPlan& plan, const BrownianBatch& b, std::size_t node) {
  const std::size_t m = b.samples();
  const auto levels_t = evaluate(terminal_claim(), b);
  Eigen::MatrixXd rhs(static_cast<Eigen::Index>(m), 1);
  for (std::size_t i = 0; i < m; ++i) rhs(static_cast<Eigen::Index>(i), 0) = levels_t[i] * levels_t[i];
  const auto fit = plan.project(node, rhs);
  const double t = b.grid().time(node);
  double se = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto lv = b.path(i).levels();
    const double w = lv[node];
    const double exact = w * w + (b.grid().horizon() - t);
    se += std::pow(fit(static_cast<Eigen::Index>(i), 0) - exact, 2);
  }
  return std::sqrt(se / static_cast<double>(m));
}

}  // namespace

TEST(Regression, SplineRecoversConditionalSecondMoment) {
  const auto b = simulate(TimeGrid(1.0, 3), 1, 40000, 77);
  const RegressionPlan plan(b, {level_feature(0)});
  EXPECT_EQ(plan.nodes(), 9u);
  for (std::size_t node : {2u, 4u, 6u}) EXPECT_LT(fit_error(plan, b, node), 0.08) << "node " << node;
}

TEST(Regression, PolynomialRecoversConditionalSecondMoment) {
  const auto b = simulate(TimeGrid(1.0, 3), 1, 40000, 77);
  RegressionOptions o;
  o.basis = BasisKind::Polynomial;
  o.degree = 2;
  const RegressionPlan plan(b, {level_feature(0)}, o);
  // A quadratic target lies in the degree-2 space, so only sampling noise remains.
  for (std::size_t node : {2u, 4u, 6u}) EXPECT_LT(fit_error(plan, b, node), 0.03) << "node " << node;
}

TEST(Regression, NodeZeroIsThePlainAverage) {
  const auto b = simulate(TimeGrid(1.0, 2), 1, 5000, 3);
  const RegressionPlan plan(b, {level_feature(0), running_max_feature(0)});
  const auto v = evaluate(running_max_claim(), b);
  Eigen::MatrixXd rhs = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  const auto fit = plan.project(0, rhs);
  for (Eigen::Index i = 0; i < 10; ++i) EXPECT_NEAR(fit(i, 0), mean(v), 1e-10);
}

TEST(Regression, ConstantsAndStateFunctionsInTheSpanAreExact) {
  const auto b = simulate(TimeGrid(1.0, 2), 1, 3000, 8);
  const RegressionPlan plan(b, {level_feature(0)});
  const std::size_t m = b.samples();
  Eigen::MatrixXd rhs(static_cast<Eigen::Index>(m), 2);
  for (std::size_t i = 0; i < m; ++i) {
    rhs(static_cast<Eigen::Index>(i), 0) = 2.5;
    rhs(static_cast<Eigen::Index>(i), 1) = b.path(i).levels()[2];
  }
  const auto fit = plan.project(2, rhs);
  for (std::size_t i = 0; i < m; ++i) {
    EXPECT_NEAR(fit(static_cast<Eigen::Index>(i), 0), 2.5, 1e-9);
    // W_t is linear, hence inside the hat-function span up to float storage of the features.
    EXPECT_NEAR(fit(static_cast<Eigen::Index>(i), 1), rhs(static_cast<Eigen::Index>(i), 1), 1e-5);
  }
}

TEST(Regression, BasisNames) {
  EXPECT_EQ(parse_basis("polynomial"), BasisKind::Polynomial);
  EXPECT_EQ(to_string(BasisKind::LinearSpline), "linear_spline");
  EXPECT_THROW(parse_basis("fourier"), std::invalid_argument);
}

TEST(Regression, PlanCacheReusesPlans) {
  PlanCache cache(2);
  const auto b = simulate(TimeGrid(1.0, 2), 1, 1000, 1);
  auto p1 = cache.get(b, {level_feature(0)}, {});
  auto p2 = cache.get(b, {level_feature(0)}, {});
  EXPECT_EQ(p1.get(), p2.get());
  auto p3 = cache.get(b, {level_feature(0), running_max_feature(0)}, {});
  EXPECT_NE(p1.get(), p3.get());
  EXPECT_EQ(unique_features({level_feature(0), level_feature(0), running_max_feature(0)}).size(), 2u);
}
