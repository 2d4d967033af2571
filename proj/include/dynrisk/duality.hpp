#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dynrisk/bsde_solver.hpp"
#include "dynrisk/generators.hpp"
#include "dynrisk/stats.hpp"
#include "dynrisk/stochastics.hpp"

namespace dynrisk {

/// Deterministic piecewise-constant drift q (per cell and coordinate) and discount rate beta
/// (per cell). The density exp(int q dW - 1/2 int |q|^2 dt) of such a tilt is always bounded.
struct TiltSpec {
  TimeGrid grid{1.0, 0};
  std::size_t dimension = 1;
  std::vector<double> q;     // cells x dimension
  std::vector<double> beta;  // cells

  static TiltSpec constant(const TimeGrid& grid, std::vector<double> q, double beta = 0.0);
  static TiltSpec zero(const TimeGrid& grid, std::size_t dimension);

  double q_at(std::size_t cell, std::size_t dim) const { return q[cell * dimension + dim]; }
  double q_norm(std::size_t cell) const;
  /// 1/2 int |q_t|^2 dt.
  double half_energy() const;
  /// D^beta_{0,t_k}.
  double discount_to(std::size_t node) const;
  /// int_0^T D^beta_{0,u} f(cell(u)) du for a per-cell integrand, exact for constant beta per cell.
  double discounted_integral(const std::vector<double>& per_cell) const;
  std::string summary() const;
  void validate() const;
};

/// Random tilts: q components uniform in [-q_max, q_max] on `pieces` equal time blocks,
/// beta uniform in [0, beta_max].
TiltSpec random_tilt(const TimeGrid& grid, std::size_t dimension, std::size_t pieces, double q_max, double beta_max,
                     std::uint64_t seed);

struct TiltedSample {
  std::vector<double> density;  // M^q_T per path
  double discount = 1.0;        // D^beta_{0,T}
  Estimate density_mean;
  double closed_form_entropy = 0.0;
};

TiltedSample tilt(const BrownianBatch& batch, const TiltSpec& spec);

struct EntropyEstimate {
  Estimate plug_in;    // E[M log M]
  double closed_form;  // 1/2 int |q|^2 dt
};

EntropyEstimate relative_entropy(const TiltedSample& ts);

/// alpha(beta, q) = int D^beta g*(beta, q) dt; +infinity when some cell's conjugate is infinite.
/// For deterministic tilts this is exact and carries no Monte Carlo error.
double penalty(const GeneratorSpec& g, const TiltSpec& spec);

/// E_Q[D^beta_{0,T} X] - alpha(beta, q); -infinity when alpha is infinite.
Estimate dual_value(const GeneratorSpec& g, const TiltSpec& spec, const TiltedSample& ts, std::span<const double> x);

struct DualEntry {
  std::string tilt;
  double dual = 0.0;
  double error = 0.0;
  double alpha = 0.0;
  double gap = 0.0;  // primal - dual
  bool pass = true;
};

struct DualGapReport {
  Estimate primal;
  std::vector<DualEntry> entries;
  double best_dual = -kInfinity;
  bool pass = true;
};

/// Weak duality: every dual value must sit below the primal E(X) up to 3 combined errors plus
/// the engine's bias budget.
DualGapReport dual_gap(const RiskMeasureHandle& handle, const PathFunctional& x, const std::vector<TiltSpec>& specs,
                       const BrownianBatch& batch, double bias_budget = 0.0);

struct DualSearchResult {
  TiltSpec best;
  Estimate value;
  std::size_t evaluations = 0;
};

/// Lower bound for E(X) from below: coordinate-wise golden-section search over constant q,
/// then over q on time blocks, stopping after `budget` penalty evaluations.
DualSearchResult dual_search(const GeneratorSpec& g, const PathFunctional& x, const BrownianBatch& batch,
                             std::size_t budget = 1000, std::size_t blocks = 4);

struct EntropyPenaltyCheck {
  double alpha = 0.0;
  double entropy = 0.0;
  double entropy_error = 0.0;
  double lhs = 0.0;  // alpha + aT
  double rhs = 0.0;  // e^{-bT} H / (2c)
  double margin = 0.0;
  double error = 0.0;
  bool pass = false;
};

/// alpha(beta, q) + aT >= e^{-bT} H(Q^q|P) / (2c) for a quadratic generator.
EntropyPenaltyCheck entropy_penalty_check(const GeneratorSpec& g, const TiltSpec& spec, const BrownianBatch& batch);

}  // namespace dynrisk
