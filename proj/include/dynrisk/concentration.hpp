#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dynrisk/bsde_solver.hpp"
#include "dynrisk/generators.hpp"
#include "dynrisk/stats.hpp"
#include "dynrisk/stochastics.hpp"

namespace dynrisk {

/// Claim classes for which a bound source applies to a generator. Throws if the generator
/// does not satisfy the hypotheses of that source at all.
unsigned admissible_classes(BoundSource source, const GeneratorSpec& g);
/// Throws std::invalid_argument when the claim is outside the admissible classes.
void validate_route(BoundSource source, const GeneratorSpec& g, const PathFunctional& x);

struct ProfilePoint {
  double lambda = 0.0;
  Estimate value;
  double bound = 0.0;
  double margin = 0.0;
  /// Standard error of the margin, including the error of the sample mean of X.
  double error = 0.0;
  /// Regression bias allowance; zero for closed-form engines.
  double bias = 0.0;
  Verdict verdict = Verdict::Pass;
  std::string scheme;
  SolveStatus status = SolveStatus::Ok;
};

struct RiskProfile {
  std::string claim;
  ClaimClass class_tag = ClaimClass::Lambda;
  std::string generator;
  BoundFunction l;
  Estimate mean;
  std::vector<ProfilePoint> points;
  /// Discrete second differences of the values are >= -3 error.
  bool convex = true;
  /// lambda E[X] - alpha(0, 0) <= E(lambda X) + 3 error at every point.
  bool dual_floor = true;

  Verdict verdict() const;
  bool pass() const { return verdict() != Verdict::Violation; }
};

struct ProfileOptions {
  /// Bias allowance C lambda 2^{-n/2} for regression-engine values.
  double bias_constant = 0.0;
  /// Seed for the second batch that must reproduce a violation; none disables confirmation.
  std::optional<std::uint64_t> confirm_seed;
  bool check_route = true;
};

/// E(lambda X) against lambda E[X] + l(lambda) on a lambda grid that must start at 0.
RiskProfile profile(const RiskMeasureHandle& handle, const PathFunctional& x, const std::vector<double>& lambdas,
                    const BrownianBatch& batch, const BoundFunction& l, const ProfileOptions& options = {});

/// Regression bias allowance: the largest |regression - closed form| / (lambda 2^{-n/2}) over the
/// claims and lambdas for the capped entropic generator, times a safety factor of 2.
double calibrate_bias(const BrownianBatch& batch, const std::vector<PathFunctional>& claims,
                      const std::vector<double>& lambdas, const SolverOptions& options = {});

struct DeviationRow {
  double r = 0.0;
  std::size_t exceed = 0;
  double tail = 0.0;
  Interval ci;
  double bound = 1.0;
  Verdict verdict = Verdict::Pass;
};

struct DeviationReport {
  std::string claim;
  BoundFunction l;
  double median = 0.0;
  Interval median_ci;
  std::size_t samples = 0;
  std::vector<DeviationRow> rows;

  Verdict verdict() const;
  bool pass() const { return verdict() == Verdict::Pass; }
};

/// exp(-l*(r - (l*)^{-1}(log 2))), or 1 when the argument is not positive.
double deviation_bound(const BoundFunction& l, double r);

/// Empirical P(X > m_X + r) against the Gaussian-type deviation bound. The tail is counted above the
/// upper confidence limit of the median and compared through its Wilson lower limit.
DeviationReport deviation_check(const BrownianBatch& batch, const PathFunctional& x, const BoundFunction& l,
                                const std::vector<double>& r_grid);

struct DimensionFreeRow {
  std::size_t n = 0;
  Estimate value;
  double bound = 0.0;
  double margin = 0.0;
  double error = 0.0;
  double bias = 0.0;
  Verdict verdict = Verdict::Pass;
  std::string scheme;
};

struct DimensionFreeReport {
  std::string claim;
  double lambda = 0.0;
  BoundFunction l;
  /// E[X_1] pooled over all blocks.
  Estimate mean;
  std::vector<DimensionFreeRow> rows;
  bool bound_constant = true;

  Verdict verdict() const;
  bool pass() const { return verdict() != Verdict::Violation && bound_constant; }
};

/// E(lambda (1/n) sum X_i) for i.i.d. copies X_i of the template on disjoint coordinate blocks.
/// The batch needs at least max(n_list) * block_dim coordinates.
DimensionFreeReport dimension_free_check(const RiskMeasureHandle& handle, const PathFunctional& x_template,
                                         const std::vector<std::size_t>& n_list, double lambda, const BoundFunction& l,
                                         const BrownianBatch& batch, std::size_t block_dim = 1,
                                         double bias_constant = 0.0);

struct PdeOptions {
  /// Space step of the coarse level; the fine level halves it.
  double dx = 0.05;
  /// dt = cfl dx^2; explicit stability needs cfl <= 1/2.
  double cfl = 0.4;
  /// Half-width of the domain in units of sqrt(T).
  double width = 6.0;
};

struct PdeRow {
  double lambda = 0.0;
  /// Richardson-extrapolated v(s, x).
  double value = 0.0;
  double coarse = 0.0;
  double fine = 0.0;
  double budget = 0.0;
  /// Quadrature value for the entropic generator, NaN otherwise.
  double reference = 0.0;
  /// Monte Carlo E(lambda f(x + W_{T-s})) - lambda E[f] - l(lambda), when a batch is supplied.
  std::optional<Estimate> monte_carlo;
  bool pass = true;
};

struct PdeReport {
  std::string generator;
  double horizon = 1.0;
  double s = 0.0;
  double x = 0.0;
  std::vector<PdeRow> rows;
  bool pass() const;
};

/// Explicit finite differences for v_t + v_xx / 2 + g(v_x) = 0 on [s, T] with terminal data
/// lambda f(y) - lambda E[f(x + W_{T-s})] - l(lambda); v(s, x) must not exceed the grid budget.
/// With a batch on [0, T - s], each value is also estimated by Monte Carlo.
PdeReport pde_check(const GeneratorSpec& g, const BoundFunction& l, const std::function<double(double)>& f,
                    double horizon, double s, double x, const std::vector<double>& lambdas,
                    const PdeOptions& options = {}, const BrownianBatch* batch = nullptr);

/// E[f(x + sqrt(tau) N)] and log E[exp(f(x + sqrt(tau) N))] by quadrature.
double gaussian_expectation(const std::function<double(double)>& f, double x, double tau);
double gaussian_log_mgf(const std::function<double(double)>& f, double x, double tau);

}  // namespace dynrisk
