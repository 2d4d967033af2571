#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dynrisk/generators.hpp"
#include "dynrisk/regression.hpp"
#include "dynrisk/stats.hpp"
#include "dynrisk/stochastics.hpp"

namespace dynrisk {

enum class SolveStatus { Ok, HeavyTail, SuspectedInfinite };

std::string to_string(SolveStatus s);

struct BsdeSolution {
  double y0 = 0.0;
  double error = 0.0;
  std::string scheme;
  SolveStatus status = SolveStatus::Ok;
  bool reduced_basis = false;
  TimeGrid grid{1.0, 0};
  std::uint64_t seed = 0;
  std::string basis;
  unsigned picard_iters = 0;
  /// samples x (nodes) conditional values and samples x cells x d controls; filled on request.
  std::vector<double> y_path;
  std::vector<double> z_path;

  Estimate estimate() const { return {y0, error}; }
};

struct SolverOptions {
  unsigned picard_iters = 3;
  RegressionOptions regression;
  bool keep_paths = false;
  /// Use the exact Cole-Hopf transform for quadratic generators where it applies; otherwise
  /// they always go through the capped regression scheme.
  bool cole_hopf = true;
};

/// E(X) = log E[e^X] on the batch, with log-sum-exp shift and delta-method error.
/// With a plan and keep_paths, y_path holds log of the regressed conditional moments.
BsdeSolution solve_entropic(std::span<const double> terminal, const BrownianBatch& batch,
                            const RegressionPlan* plan = nullptr, bool keep_paths = false);
BsdeSolution solve_entropic(const PathFunctional& x, const BrownianBatch& batch);

/// Backward regression scheme for a generator Lipschitz in z. Terminal values sit at
/// terminal_node (the last node by default), which allows solving on [0, t_s].
BsdeSolution solve_regression(const GeneratorSpec& g, std::span<const double> terminal, const BrownianBatch& batch,
                              const RegressionPlan& plan, const SolverOptions& options = {},
                              std::size_t terminal_node = static_cast<std::size_t>(-1));
BsdeSolution solve_regression(const GeneratorSpec& g, const PathFunctional& x, const BrownianBatch& batch,
                              const SolverOptions& options = {});

/// A convex risk measure E built from a generator. Entropic generators use the closed form,
/// Lipschitz ones the regression scheme, quadratic ones the Cole-Hopf transform where it is exact
/// and otherwise, like superquadratic ones, a capped generator.
class RiskMeasureHandle {
 public:
  explicit RiskMeasureHandle(GeneratorSpec g, SolverOptions options = {});

  const GeneratorSpec& generator() const { return g_; }
  const SolverOptions& options() const { return options_; }
  /// True when g(t, y, 0) = 0, hence E(0) = 0.
  bool normalization_checked() const { return normalized_; }

  /// Generator actually handed to the regression engine for a claim of the given Lipschitz size.
  GeneratorSpec routed_generator(double horizon, double claim_lipschitz) const;
  /// Quadratic generators with c > 0 are solved exactly through exp(2cY) when the y-term cannot
  /// act: b = 0, or a nonnegative claim (then Y >= 0).
  bool cole_hopf_applies(const PathFunctional& x) const;

  BsdeSolution solve(const PathFunctional& x, const BrownianBatch& batch, double lambda = 1.0) const;
  /// E(lambda X) with its Monte Carlo error.
  Estimate evaluate_risk(const PathFunctional& x, double lambda, const BrownianBatch& batch) const;

 private:
  GeneratorSpec g_;
  SolverOptions options_;
  bool normalized_;
};

Estimate evaluate_risk(const RiskMeasureHandle& handle, const PathFunctional& x, double lambda,
                       const BrownianBatch& batch);

struct DominationReport {
  double lhs = 0.0;  // rho(X1 + X2) - rho(X1)
  double rhs = 0.0;  // E^kappa(X2)
  double margin = 0.0;
  double error = 0.0;
  bool pass = false;
};

DominationReport check_kappa_domination(const RiskMeasureHandle& handle, double kappa, const PathFunctional& x1,
                                        const PathFunctional& x2, const BrownianBatch& batch);

/// Fraction of paths with Y_0 - sum g dt + sum Z dW >= Y_T - tolerance; needs stored paths.
double supersolution_fraction(const BsdeSolution& sol, const GeneratorSpec& g, const BrownianBatch& batch,
                              double tolerance);

struct AxiomCheck {
  std::string name;
  double margin = 0.0;
  double error = 0.0;
  bool pass = false;
};

struct AxiomReport {
  std::string generator;
  std::vector<AxiomCheck> checks;
  bool pass() const;
};

/// Cash additivity, normalization, monotonicity and convexity on random pairs built from the
/// given claims, plus a tower check at the middle node on the regression engine. A check passes
/// when its margin is at least -(3 stderr + bias), bias being the regression bias budget.
AxiomReport axiom_suite(const RiskMeasureHandle& handle, const std::vector<PathFunctional>& claims,
                        const BrownianBatch& batch, std::size_t pairs, std::uint64_t seed, double bias = 0.0);

}  // namespace dynrisk
