#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dynrisk/stats.hpp"

namespace dynrisk {

/// Uniform dyadic grid t_k = k T 2^-n, k = 0..2^n.
class TimeGrid {
 public:
  static constexpr unsigned kMaxLevels = 20;

  TimeGrid(double horizon, unsigned levels);

  double horizon() const { return horizon_; }
  unsigned levels() const { return levels_; }
  std::size_t cells() const { return std::size_t{1} << levels_; }
  double step() const { return horizon_ / static_cast<double>(cells()); }
  double time(std::size_t k) const { return static_cast<double>(k) * step(); }
  std::vector<double> times() const;

  bool operator==(const TimeGrid&) const = default;

 private:
  double horizon_;
  unsigned levels_;
};

/// Read-only view of one path's increment matrix, laid out [cell][dimension].
struct PathView {
  std::span<const double> increments;
  std::size_t cells = 0;
  std::size_t dimension = 0;
  double step = 0.0;

  double increment(std::size_t cell, std::size_t dim) const { return increments[cell * dimension + dim]; }
  /// Levels W_{t_k}, k = 0..cells, laid out [k][dimension]; row 0 is the origin.
  std::vector<double> levels() const;
};

/// M simulated d-dimensional Brownian paths stored as increments.
class BrownianBatch {
 public:
  BrownianBatch(TimeGrid grid, std::size_t dimension, std::size_t samples, std::uint64_t seed,
                std::vector<double> increments);

  const TimeGrid& grid() const { return grid_; }
  std::size_t dimension() const { return dimension_; }
  std::size_t samples() const { return samples_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t row_size() const { return grid_.cells() * dimension_; }

  std::span<const double> data() const { return increments_; }
  std::span<const double> increments(std::size_t path) const;
  PathView path(std::size_t i) const;

  /// Same paths observed on a coarser dyadic grid (increments summed in blocks).
  BrownianBatch coarsened(unsigned levels) const;
  /// Coordinates [first, first + count) of every path, as a lower-dimensional batch.
  BrownianBatch coordinate_block(std::size_t first, std::size_t count) const;

  bool operator==(const BrownianBatch&) const = default;

 private:
  TimeGrid grid_;
  std::size_t dimension_;
  std::size_t samples_;
  std::uint64_t seed_;
  std::vector<double> increments_;
};

/// Simulates increments with independent per-path counter-based streams keyed on (seed, path).
BrownianBatch simulate(const TimeGrid& grid, std::size_t dimension, std::size_t samples, std::uint64_t seed);
/// Paths [first, first + count) of the same stream family, for chunked simulation.
BrownianBatch simulate_range(const TimeGrid& grid, std::size_t dimension, std::size_t first, std::size_t count,
                             std::uint64_t seed);

/// SplitMix64 finaliser; used to derive per-path stream keys.
std::uint64_t mix64(std::uint64_t x);

/// Claim classes: Lipschitz functions of grid levels (Lambda), of increments (LambdaPrime),
/// their nonnegative versions, and Lipschitz functionals of the whole path.
enum class ClaimClass : unsigned {
  Lambda = 1u << 0,
  LambdaPlus = 1u << 1,
  LambdaPrime = 1u << 2,
  LambdaPrimePlus = 1u << 3,
  PathLipschitz = 1u << 4,
};

std::string to_string(ClaimClass c);
unsigned mask(ClaimClass c);

/// A state variable observed along the path. The regression engine conditions on these.
struct Feature {
  std::string key;
  /// Fills cells + 1 values, one per grid node.
  std::function<void(const PathView&, std::span<double>)> fill;
};

/// A claim X = f(path) together with its Lipschitz certificate and class membership.
///
/// lipschitz_constant bounds |f(x) - f(y)| relative to the norm of the class: the Euclidean
/// norm of the level vector for Lambda, and sum over cells of the per-cell Euclidean norm of
/// the increment difference for LambdaPrime. Both bound the Malliavin derivative |D_t X|.
struct PathFunctional {
  std::string name;
  std::function<double(const PathView&)> evaluate;
  double lipschitz_constant = 0.0;
  bool nonneg = false;
  ClaimClass class_tag = ClaimClass::Lambda;
  unsigned classes = 0;
  std::vector<Feature> features;

  bool in(ClaimClass c) const { return (classes & mask(c)) != 0; }
};

std::vector<double> evaluate(const PathFunctional& x, const BrownianBatch& batch);

// Built-in state features.
Feature level_feature(std::size_t dim);
Feature running_max_feature(std::size_t dim);
Feature running_integral_feature(std::size_t dim);
/// Partial sums of sum_j sigma_j . dW_j with per-cell weights laid out [cell][dimension].
Feature weighted_level_feature(std::string key, std::vector<double> weights, std::size_t dimension);

/// A functional on continuous paths, Lipschitz for w -> sum_i sup_t |w^i_t|.
/// It is evaluated on piecewise-linear paths given by their knots, laid out [k][dimension].
struct PathMap {
  std::string name;
  std::function<double(std::span<const double> knots, std::size_t dimension)> evaluate;
  bool nonneg = false;
  std::vector<Feature> features;
};

PathMap terminal_value_map(std::size_t dim = 0);
PathMap running_sup_map(std::size_t dim = 0);
PathMap time_average_map(double horizon, std::size_t dim = 0);
PathMap abs_terminal_map(std::size_t dim = 0);

/// X^n = phi(f^n(dW)) with f^n the piecewise-linear interpolation of the increments.
PathFunctional discretize_path_functional(const PathMap& phi, const TimeGrid& grid, std::size_t dimension = 1);

/// Payoff log(S_T) of dS = S(b dt + sigma . dW), with left-point stochastic integral on the grid.
PathFunctional log_contract(double s0, const std::function<double(double)>& drift,
                            const std::function<std::vector<double>(double)>& volatility, const TimeGrid& grid,
                            std::size_t dimension = 1);

// Claim constructors and combinators.
PathFunctional terminal_claim(std::size_t dim = 0);
PathFunctional running_max_claim(std::size_t dim = 0);
PathFunctional abs_terminal_claim(std::size_t dim = 0);
PathFunctional constant_claim(double value);
PathFunctional positive_part(const PathFunctional& x, double shift = 0.0);
PathFunctional scaled(const PathFunctional& x, double factor);
PathFunctional shifted(const PathFunctional& x, double offset);
PathFunctional negated(const PathFunctional& x);
PathFunctional sum(const PathFunctional& a, const PathFunctional& b);
/// mu a + (1 - mu) b.
PathFunctional mixture(const PathFunctional& a, const PathFunctional& b, double mu);
/// (1/n) sum_i X(block i), where block i holds coordinates [i*block_dim, (i+1)*block_dim).
PathFunctional block_average(const PathFunctional& block_claim, std::size_t blocks, std::size_t block_dim);

struct DiscretizationStudy {
  std::vector<unsigned> levels;
  unsigned fine_levels = 0;
  double p = 2.0;
  /// E|phi(W) - X^n|^p per level, with phi(W) taken on the fine grid.
  std::vector<Estimate> moments;
  /// Slope of log E|phi(W) - X^n|^p against log 2^n.
  double slope = 0.0;
};

/// L^p error of the piecewise-linear discretization X^n = phi(f^n) against a fine-grid reference.
DiscretizationStudy discretization_error(const PathMap& phi, const std::vector<unsigned>& levels, unsigned fine_levels,
                                         std::size_t samples, std::uint64_t seed, double p = 2.0,
                                         std::size_t dimension = 1);

/// Largest observed |f(x) - f(y)| / ||x - y|| over random pairs, in the norm of the class.
double empirical_lipschitz(const PathFunctional& x, ClaimClass norm, const TimeGrid& grid, std::size_t dimension,
                           std::size_t pairs, std::uint64_t seed);

}  // namespace dynrisk
