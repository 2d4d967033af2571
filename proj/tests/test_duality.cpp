#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dynrisk/duality.hpp"

using namespace dynrisk;

TEST(Tilt, ConstantTiltEnergyAndDiscount) {
  const TimeGrid g(2.0, 2);
  const auto t = TiltSpec::constant(g, {0.6, 0.8}, 0.25);
  EXPECT_EQ(t.dimension, 2u);
  EXPECT_DOUBLE_EQ(t.half_energy(), 0.5 * 1.0 * 2.0);
  EXPECT_NEAR(t.discount_to(4), std::exp(-0.5), 1e-15);
  // int_0^T e^{-beta u} du for a constant integrand of 1.
  EXPECT_NEAR(t.discounted_integral(std::vector<double>(4, 1.0)), (1 - std::exp(-0.5)) / 0.25, 1e-12);
}

TEST(Tilt, DensityHasUnitMeanAndGirsanovShift) {
  const TimeGrid g(1.0, 3);
  const auto b = simulate(g, 1, 100000, 55);
  const auto spec = TiltSpec::constant(g, {0.7});
  const auto ts = tilt(b, spec);
  EXPECT_NEAR(ts.density_mean.value, 1.0, 4 * ts.density_mean.error);
  // Under Q the terminal value has mean q T.
  const auto w = evaluate(terminal_claim(), b);
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += ts.density[i] * w[i];
  EXPECT_NEAR(acc / w.size(), 0.7, 0.02);
}

TEST(Entropy, PlugInMatchesHalfEnergyForRandomTilts) {
  for (std::size_t d : {1u, 2u}) {
    const TimeGrid g(1.0, 3);
    const auto b = simulate(g, d, 100000, 70 + d);
    for (std::uint64_t s = 0; s < 4; ++s) {
      const auto spec = random_tilt(g, d, 4, 2.0, 0.0, 1000 + s);
      const auto e = relative_entropy(tilt(b, spec));
      EXPECT_DOUBLE_EQ(e.closed_form, spec.half_energy());
      EXPECT_NEAR(e.plug_in.value, e.closed_form, 3 * e.plug_in.error + 1e-12) << spec.summary();
    }
  }
}

TEST(Penalty, EntropicAndLipschitz) {
  const TimeGrid g(1.0, 2);
  EXPECT_DOUBLE_EQ(penalty(entropic(), TiltSpec::constant(g, {1.2})), 0.72);
  EXPECT_EQ(penalty(lipschitz_z(1.0), TiltSpec::constant(g, {1.2})), kInfinity);
  EXPECT_EQ(penalty(lipschitz_z(1.0), TiltSpec::constant(g, {0.8})), 0.0);
  // g = a + c|z|^2: g*(0, q) = q^2/(4c) - a per unit time.
  EXPECT_NEAR(penalty(quadratic(1.0, 0.0, 0.5), TiltSpec::constant(g, {1.0})), 0.5 - 1.0, 1e-15);
}

TEST(Duality, EntropicOptimalTiltAttainsPrimal) {
  // E(W_T) = 1/2 is attained at q = 1: E_Q[W_T] - 1/2 = 1/2.
  const TimeGrid g(1.0, 2);
  const auto b = simulate(g, 1, 100000, 3);
  const auto x = evaluate(terminal_claim(), b);
  const auto spec = TiltSpec::constant(g, {1.0});
  const auto dv = dual_value(entropic(), spec, tilt(b, spec), x);
  EXPECT_NEAR(dv.value, 0.5, 4 * dv.error);
}

TEST(Duality, WeakDualityAcrossRandomTilts) {
  const TimeGrid g(1.0, 4);
  const auto b = simulate(g, 1, 20000, 21);
  std::vector<TiltSpec> specs;
  for (std::uint64_t s = 0; s < 8; ++s) specs.push_back(random_tilt(g, 1, 2, 1.0, 0.0, s));
  const auto r = dual_gap(RiskMeasureHandle(lipschitz_z(1.0)), running_max_claim(), specs, b, 0.05);
  EXPECT_TRUE(r.pass);
  for (const auto& e : r.entries) EXPECT_TRUE(e.pass) << e.tilt << " gap " << e.gap;
}

TEST(Duality, SearchApproachesPrimalFromBelow) {
  const TimeGrid g(1.0, 2);
  const auto b = simulate(g, 1, 50000, 4);
  const auto res = dual_search(entropic(), terminal_claim(), b, 200, 2);
  EXPECT_NEAR(res.value.value, 0.5, 0.02);
  EXPECT_LE(res.evaluations, 200u);
}

TEST(EntropyPenalty, QuadraticPenaltyDominatesScaledEntropy) {
  const TimeGrid g(1.0, 3);
  const auto b = simulate(g, 2, 50000, 9);
  for (const auto& gen : {quadratic(0.0, 0.0, 0.5), quadratic(1.0, 0.5, 1.0), quadratic(0.0, 0.5, 0.25)}) {
    for (std::uint64_t s = 0; s < 3; ++s) {
      const auto spec = random_tilt(g, 2, 4, 2.0, 0.5, 40 + s);
      const auto c = entropy_penalty_check(gen, spec, b);
      EXPECT_TRUE(c.pass) << gen.describe() << " " << spec.summary() << " margin " << c.margin;
    }
  }
  EXPECT_THROW(entropy_penalty_check(lipschitz_z(1.0), TiltSpec::zero(g, 2), b), std::invalid_argument);
}
