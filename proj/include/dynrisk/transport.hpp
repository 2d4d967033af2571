#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dynrisk/duality.hpp"
#include "dynrisk/generators.hpp"
#include "dynrisk/stats.hpp"
#include "dynrisk/stochastics.hpp"

namespace dynrisk {

/// Finitely supported probability measure on R^m. Duplicate points are merged on construction.
class DiscreteMeasure {
 public:
  DiscreteMeasure(std::size_t dimension, std::vector<double> points, std::vector<double> weights);

  static DiscreteMeasure dirac(std::vector<double> point);

  std::size_t size() const { return weights_.size(); }
  std::size_t dimension() const { return dimension_; }
  const double* point(std::size_t i) const { return &points_[i * dimension_]; }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }

  double integrate(const std::function<double(const double*)>& f) const;
  /// Index of the atom at exactly this point, or size() if none.
  std::size_t find(const double* p) const;

 private:
  std::size_t dimension_;
  std::vector<double> points_;
  std::vector<double> weights_;
};

struct CouplingEntry {
  std::size_t from;
  std::size_t to;
  double mass;
};

struct TransportPlan {
  double cost = 0.0;
  std::vector<CouplingEntry> coupling;
  std::size_t pivots = 0;
};

/// Largest dense cost matrix the exact solver accepts.
inline constexpr std::size_t kMaxCostEntries = 4'000'000;

/// Exact W1 with Euclidean ground cost by the transportation simplex on the dense cost matrix.
TransportPlan wasserstein1(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// sum mu_i log(mu_i / nu_i) over shared atoms; +infinity if mu charges an atom nu does not.
double kl_divergence(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// Equal-probability quantization of the standard Gaussian on R^dim: per axis the midpoints
/// Phi^{-1}((i + 1/2) / n) with weight 1/n, combined as a product grid.
DiscreteMeasure gaussian_quantization(std::size_t per_axis, std::size_t dimension = 1);
/// Per-axis size used by default: 512 in 1-d, 24 in 2-d, 8 in 3-d.
std::size_t default_quantization(std::size_t dimension);

/// N(mean, sd^2) per axis (independent coordinates) pushed onto the reference quantization
/// grid: each atom receives the perturbed mass of its equal-probability cell.
DiscreteMeasure perturbed_gaussian(std::size_t per_axis, const std::vector<double>& mean, const std::vector<double>& sd);

/// Closed forms in 1-d, used for calibration.
double gaussian_w1(double mean, double sd);
double gaussian_kl(double mean, double sd);

/// Slack for the T1 margin KL - W1^2/2 on the quantization: the largest discrepancy between the
/// quantized and continuous margins over a grid of 1-d Gaussian perturbations (mean in [-1, 1],
/// sd in [0.6, 1.6]), doubled. Cached per N.
double quantization_budget(std::size_t per_axis);

struct T1Report {
  double w1 = 0.0;
  double h_w1 = 0.0;  // W1^2 / 2 with h_scale
  double kl = 0.0;
  double budget = 0.0;
  double margin = 0.0;  // kl + budget - h_w1
  bool pass = false;
};

/// Talagrand T1 on a quantized reference: h(W1(mu, ref)) <= KL(mu | ref) + budget with h(x) = x^2 / (2 h_scale).
T1Report check_t1(const DiscreteMeasure& mu, const DiscreteMeasure& gauss_ref, double budget, double h_scale = 1.0);

struct TestFunction {
  std::string name;
  std::function<double(const double*)> f;
};

/// Cones x -> +-|x - p| at the given points.
std::vector<TestFunction> cone_family(const std::vector<double>& points_1d);
/// All 1-Lipschitz piecewise-linear functions on the sorted 1-d support with slopes +-1 between
/// consecutive points; the optimal Kantorovich potential of a 1-d problem is one of them.
std::vector<TestFunction> slope_sign_family(const std::vector<double>& points_1d);

struct KrReport {
  double family_sup = 0.0;
  std::string argmax;
  double w1 = 0.0;
  double gap = 0.0;  // w1 - family_sup
  bool lower_bound_holds = false;
};

/// Rejects any test function that is not 1-Lipschitz on the union support.
KrReport kantorovich_rubinstein_gap(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                    const std::vector<TestFunction>& family);

struct TransportEntry {
  std::string tilt;
  double w1_lower = 0.0;  // family supremum of E_Q[X] - E_P[X] (discounted for subprobabilities)
  double w1_error = 0.0;
  std::string argmax;
  double lstar = 0.0;
  double alpha = 0.0;
  double margin = 0.0;  // alpha - l*(w1_lower)
  double error = 0.0;
  bool pass = true;
};

struct TransportReport {
  std::vector<TransportEntry> entries;
  bool pass = true;
};

/// l*(W1'(Q^q, P)) <= alpha(q) with W1' estimated from below by the family. Tilts with beta > 0
/// use the subprobability form sup_X E_Q[D X] - E_P[X] over nonnegative claims only.
TransportReport transport_inequality_check(const GeneratorSpec& g, const BoundFunction& l,
                                           const std::vector<TiltSpec>& specs,
                                           const std::vector<PathFunctional>& family, const BrownianBatch& batch);

}  // namespace dynrisk
