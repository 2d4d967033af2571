#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynrisk/stochastics.hpp"

namespace dynrisk {

enum class BasisKind {
  /// Continuous piecewise-linear functions of the state: tensor products of hat functions
  /// on per-feature quantile knots.
  LinearSpline,
  /// Global polynomials of bounded total degree in the standardized state.
  Polynomial,
};

std::string to_string(BasisKind b);
BasisKind parse_basis(const std::string& name);

struct RegressionOptions {
  BasisKind basis = BasisKind::LinearSpline;
  /// Total degree of the polynomial basis.
  unsigned degree = 3;
  /// The polynomial degree is lowered until the basis has at most this many functions.
  std::size_t max_basis = 35;
  /// Upper bound on the spline basis size; knots per feature are set from it.
  std::size_t spline_basis = 128;
  /// Minimum number of paths per spline basis function.
  std::size_t paths_per_function = 50;
};

/// Least-squares projection onto functions of the path state, one regression per grid node.
/// Feature trajectories are computed once and the normal equations are factorized per node,
/// so a plan is reused across claims that share features, scalings and generators.
class RegressionPlan {
 public:
  RegressionPlan(const BrownianBatch& batch, const std::vector<Feature>& features, RegressionOptions options = {});

  std::size_t samples() const { return samples_; }
  std::size_t nodes() const { return nodes_; }
  std::size_t basis_size(std::size_t node) const;
  /// True if some node's normal equations were rank deficient and solved on the reduced range.
  bool reduced_basis() const { return reduced_; }
  const std::vector<std::string>& feature_keys() const { return keys_; }
  std::string describe() const;

  /// Fitted values of E[rhs | state at node], column by column.
  Eigen::MatrixXd project(std::size_t node, const Eigen::MatrixXd& rhs) const;

  /// Projection at one node that keeps the design matrix between calls.
  class Projector {
   public:
    Eigen::MatrixXd operator()(const Eigen::MatrixXd& rhs) const;

   private:
    friend class RegressionPlan;
    Projector(const RegressionPlan& plan, std::size_t node);
    const RegressionPlan* plan_;
    std::size_t node_;
    Eigen::MatrixXd design_;
    // Spline basis: the 2^active nonzero functions of each path.
    std::size_t corners_ = 0;
    std::vector<std::uint32_t> index_;
    std::vector<double> weight_;
  };
  Projector projector(std::size_t node) const { return Projector(*this, node); }

  /// Raw feature value for path m at node k.
  double feature(std::size_t m, std::size_t k, std::size_t f) const {
    return features_[(k * samples_ + m) * keys_.size() + f];
  }

 private:
  struct Step {
    std::vector<std::size_t> active;
    std::vector<double> centre;
    std::vector<double> scale;
    // Polynomial basis.
    std::vector<std::vector<unsigned>> exponents;
    Eigen::MatrixXd gram_pinv;
    // Spline basis: knots per active feature (standardized units) and row strides of the tensor index.
    std::vector<std::vector<double>> knots;
    // Uniform buckets over each knot range mapping to the first knot interval they meet.
    std::vector<std::vector<std::uint16_t>> bucket;
    std::vector<double> bucket_scale;
    std::vector<std::size_t> stride;
    std::size_t spline_size = 0;
  };

  Eigen::MatrixXd design(std::size_t node) const;
  /// Nonzero spline basis functions for path m at a node; returns their count (2^active).
  std::size_t spline_values(std::size_t m, std::size_t node, std::size_t* index, double* weight) const;
  void build_polynomial(std::size_t node);
  void build_spline(std::size_t node);
  Eigen::MatrixXd project_polynomial(std::size_t node, const Eigen::MatrixXd& design, const Eigen::MatrixXd& rhs) const;
  Eigen::MatrixXd project_spline(std::size_t node, const Projector& basis, const Eigen::MatrixXd& rhs) const;

  std::size_t samples_;
  std::size_t nodes_;
  std::vector<std::string> keys_;
  std::vector<float> features_;
  std::vector<Step> steps_;
  RegressionOptions options_;
  bool reduced_ = false;
};

/// Small process-wide cache of plans keyed by batch identity and feature keys. Plans for large
/// batches are hundreds of megabytes, so only a couple are retained.
class PlanCache {
 public:
  explicit PlanCache(std::size_t capacity = 2) : capacity_(capacity) {}

  std::shared_ptr<const RegressionPlan> get(const BrownianBatch& batch, const std::vector<Feature>& features,
                                            const RegressionOptions& options);
  void clear();

  static PlanCache& global();

 private:
  struct Entry {
    std::string key;
    std::shared_ptr<const RegressionPlan> plan;
  };
  std::size_t capacity_;
  std::vector<Entry> entries_;
  std::mutex mutex_;
};

/// Features with duplicate keys removed, first occurrence kept.
std::vector<Feature> unique_features(const std::vector<Feature>& features);

}  // namespace dynrisk
