#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string_view>

namespace dynrisk {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Sample mean and Monte Carlo standard error of the mean.
struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

double mean(std::span<const double> xs);
/// Unbiased sample variance; zero for fewer than two samples.
double variance(std::span<const double> xs);
Estimate mean_estimate(std::span<const double> xs);

/// Root-sum-square of independent error contributions.
double combine_errors(double a, double b);
double combine_errors(double a, double b, double c);

double normal_cdf(double x);
double normal_survival(double x);
double normal_quantile(double p);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Wilson score interval for a binomial proportion at normal quantile z.
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

/// Sample quantile by order statistic (type-1, no interpolation).
double order_statistic(std::span<const double> xs, std::size_t rank);
double sample_median(std::span<const double> xs);
/// Distribution-free confidence interval for the median from binomial order statistics.
Interval median_interval(std::span<const double> xs, double z = 1.959963984540054);

/// Three-valued outcome of a statistically guarded inequality check.
enum class Verdict { Pass, Inconclusive, Violation };

std::string_view to_string(Verdict v);

/// Acceptance bands for a margin that must be nonnegative (bound - value).
struct Bands {
  double pass_sigmas = 3.0;
  double violation_sigmas = 5.0;
};

/// Classifies one margin. A Violation here is provisional until confirmed on a second seed.
Verdict classify(double margin, double error, const Bands& bands = {});

/// Combines a provisional verdict with the verdict on an independent replicate.
Verdict confirm(Verdict first, Verdict second);

/// Least-squares slope of y against x.
double regression_slope(std::span<const double> x, std::span<const double> y);

}  // namespace dynrisk
