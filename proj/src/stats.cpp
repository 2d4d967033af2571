#include "dynrisk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace dynrisk {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  // Kahan summation; batches reach 1e5+ terms.
  double sum = 0.0, c = 0.0;
  for (double x : xs) {
    double y = x - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  return sum / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return acc / static_cast<double>(xs.size() - 1);
}

Estimate mean_estimate(std::span<const double> xs) {
  Estimate e;
  e.value = mean(xs);
  if (!xs.empty()) e.error = std::sqrt(variance(xs) / static_cast<double>(xs.size()));
  return e;
}

double combine_errors(double a, double b) { return std::hypot(a, b); }
double combine_errors(double a, double b, double c) { return std::sqrt(a * a + b * b + c * c); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double normal_survival(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0,1)");
  static const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, p);
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double order_statistic(std::span<const double> xs, std::size_t rank) {
  if (xs.empty()) throw std::invalid_argument("order_statistic: empty sample");
  rank = std::min(rank, xs.size() - 1);
  std::vector<double> copy(xs.begin(), xs.end());
  std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(rank), copy.end());
  return copy[rank];
}

double sample_median(std::span<const double> xs) { return order_statistic(xs, (xs.size() - 1) / 2); }

Interval median_interval(std::span<const double> xs, double z) {
  if (xs.empty()) throw std::invalid_argument("median_interval: empty sample");
  const double n = static_cast<double>(xs.size());
  const double half_width = z * std::sqrt(n) / 2.0;
  const double lo = std::max(0.0, std::floor(n / 2.0 - half_width));
  const double hi = std::min(n - 1.0, std::ceil(n / 2.0 + half_width));
  std::vector<double> copy(xs.begin(), xs.end());
  std::sort(copy.begin(), copy.end());
  return {copy[static_cast<std::size_t>(lo)], copy[static_cast<std::size_t>(hi)]};
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Inconclusive: return "STATISTICALLY-INCONCLUSIVE";
    case Verdict::Violation: return "VIOLATION";
  }
  return "?";
}

Verdict classify(double margin, double error, const Bands& bands) {
  if (std::isnan(margin)) return Verdict::Inconclusive;
  if (margin >= -bands.pass_sigmas * error) return Verdict::Pass;
  if (margin < -bands.violation_sigmas * error) return Verdict::Violation;
  return Verdict::Inconclusive;
}

Verdict confirm(Verdict first, Verdict second) {
  if (first != Verdict::Violation) return first;
  return second == Verdict::Violation ? Verdict::Violation : Verdict::Inconclusive;
}

double regression_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("regression_slope: need two or more paired points");
  double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace dynrisk
