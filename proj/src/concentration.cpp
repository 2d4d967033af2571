#include "dynrisk/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dynrisk/duality.hpp"

namespace dynrisk {

namespace {

bool closed_form(const std::string& scheme) { return scheme != "regression"; }

double regression_bias(double constant, double lambda, const TimeGrid& grid) {
  return constant * lambda * std::pow(2.0, -0.5 * static_cast<double>(grid.levels()));
}

// Superquadratic sources whose capped envelope phi(|z|)|z| stays below c|z|^2 near the origin.
bool superquadratic_source(const GeneratorSpec& g) {
  const GeneratorSpec* s = &g;
  if (s->kind == GeneratorKind::Capped) s = s->source.get();
  if (s->kind != GeneratorKind::Superquadratic) return false;
  return s->phi.coef == 0.0 || s->phi.power >= 1.0;
}

Verdict worst(Verdict a, Verdict b) { return static_cast<int>(a) > static_cast<int>(b) ? a : b; }

struct PointValue {
  Estimate value;
  std::string scheme;
  SolveStatus status = SolveStatus::Ok;
};

PointValue risk_at(const RiskMeasureHandle& handle, const PathFunctional& x, double lambda,
                   const BrownianBatch& batch) {
  if (lambda == 0.0 && handle.normalization_checked()) return {{0.0, 0.0}, "exact", SolveStatus::Ok};
  auto sol = handle.solve(x, batch, lambda);
  return {sol.estimate(), sol.scheme, sol.status};
}

}  // namespace

unsigned admissible_classes(BoundSource source, const GeneratorSpec& g) {
  switch (source) {
    case BoundSource::QuadraticGrowth: {
      if (!std::isfinite(g.growth().c))
        throw std::invalid_argument("quadratic-growth bound needs a generator with finite growth constants");
      return g.depends_on_y() ? mask(ClaimClass::LambdaPlus) : mask(ClaimClass::Lambda);
    }
    case BoundSource::KappaDominated:
      if (g.depends_on_y() || !std::isfinite(g.z_lipschitz()))
        throw std::invalid_argument("kappa-dominated bound needs a y-free generator Lipschitz in z");
      return mask(ClaimClass::PathLipschitz) | mask(ClaimClass::LambdaPrime);
    case BoundSource::CappedSuperquadratic:
    case BoundSource::PathLipschitzSuperquadratic: {
      if (!superquadratic_source(g))
        throw std::invalid_argument(
            "superquadratic bound needs a superquadratic generator with phi(x) <= c x near 0 (power >= 1)");
      if (source == BoundSource::PathLipschitzSuperquadratic) return mask(ClaimClass::PathLipschitz);
      return g.depends_on_y() ? mask(ClaimClass::LambdaPrimePlus) : mask(ClaimClass::LambdaPrime);
    }
  }
  throw std::invalid_argument("unknown bound source");
}

void validate_route(BoundSource source, const GeneratorSpec& g, const PathFunctional& x) {
  const unsigned allowed = admissible_classes(source, g);
  const bool needs_sign = source == BoundSource::PathLipschitzSuperquadratic && g.depends_on_y();
  if ((x.classes & allowed) == 0 || (needs_sign && !x.nonneg))
    throw std::invalid_argument("claim " + x.name + " is outside the claim classes of the " + to_string(source) +
                                " bound for generator " + g.describe());
}

Verdict RiskProfile::verdict() const {
  Verdict v = Verdict::Pass;
  for (const auto& p : points) v = worst(v, p.verdict);
  return v;
}

RiskProfile profile(const RiskMeasureHandle& handle, const PathFunctional& x, const std::vector<double>& lambdas,
                    const BrownianBatch& batch, const BoundFunction& l, const ProfileOptions& options) {
  if (lambdas.empty() || lambdas.front() != 0.0) throw std::invalid_argument("profile: the lambda grid must start at 0");
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] > lambdas[i - 1])) throw std::invalid_argument("profile: the lambda grid must be increasing");
  if (options.check_route) validate_route(l.source, handle.generator(), x);

  RiskProfile out;
  out.claim = x.name;
  out.class_tag = x.class_tag;
  out.generator = handle.generator().describe();
  out.l = l;
  const auto xs = evaluate(x, batch);
  out.mean = mean_estimate(xs);
  const double alpha0 = penalty(handle.generator(), TiltSpec::zero(batch.grid(), batch.dimension()));

  std::optional<BrownianBatch> replicate;
  std::optional<Estimate> replicate_mean;
  for (double lambda : lambdas) {
    ProfilePoint p;
    p.lambda = lambda;
    auto v = risk_at(handle, x, lambda, batch);
    p.value = v.value;
    p.scheme = v.scheme;
    p.status = v.status;
    p.bias = closed_form(v.scheme) ? 0.0 : regression_bias(options.bias_constant, lambda, batch.grid());
    p.bound = lambda * out.mean.value + l(lambda);
    p.margin = p.bound - p.value.value;
    p.error = combine_errors(p.value.error, lambda * out.mean.error);
    p.verdict = classify(p.margin, p.error + p.bias);
    if (p.verdict == Verdict::Violation && options.confirm_seed) {
      if (!replicate) {
        replicate = simulate(batch.grid(), batch.dimension(), batch.samples(), *options.confirm_seed);
        replicate_mean = mean_estimate(evaluate(x, *replicate));
      }
      auto w = risk_at(handle, x, lambda, *replicate);
      const double margin = lambda * replicate_mean->value + l(lambda) - w.value.value;
      const double error = combine_errors(w.value.error, lambda * replicate_mean->error);
      p.verdict = confirm(p.verdict, classify(margin, error + p.bias));
    }
    if (lambda * out.mean.value - alpha0 > p.value.value + 3.0 * (p.error + p.bias)) out.dual_floor = false;
    out.points.push_back(std::move(p));
  }
  for (std::size_t i = 1; i + 1 < out.points.size(); ++i) {
    const auto& a = out.points[i - 1];
    const auto& b = out.points[i];
    const auto& c = out.points[i + 1];
    const double w = (b.lambda - a.lambda) / (c.lambda - a.lambda);
    const double chord = (1.0 - w) * a.value.value + w * c.value.value;
    const double err = combine_errors(a.value.error + a.bias, b.value.error + b.bias, c.value.error + c.bias);
    if (b.value.value > chord + 3.0 * err) out.convex = false;
  }
  return out;
}

double calibrate_bias(const BrownianBatch& batch, const std::vector<PathFunctional>& claims,
                      const std::vector<double>& lambdas, const SolverOptions& options) {
  const RiskMeasureHandle entropic_handle(entropic(), options);
  const double unit = std::pow(2.0, -0.5 * static_cast<double>(batch.grid().levels()));
  double worst_ratio = 0.0;
  for (const auto& x : claims) {
    const auto xs = evaluate(x, batch);
    for (double lambda : lambdas) {
      if (!(lambda > 0.0)) continue;
      std::vector<double> v(xs);
      for (double& e : v) e *= lambda;
      const double exact = solve_entropic(v, batch).y0;
      const auto g = entropic_handle.routed_generator(batch.grid().horizon(), lambda * x.lipschitz_constant);
      auto plan = PlanCache::global().get(batch, x.features, options.regression);
      const double approx = solve_regression(g, v, batch, *plan, options).y0;
      worst_ratio = std::max(worst_ratio, std::abs(approx - exact) / (lambda * unit));
    }
  }
  return 2.0 * worst_ratio;
}

Verdict DeviationReport::verdict() const {
  Verdict v = Verdict::Pass;
  for (const auto& r : rows) v = worst(v, r.verdict);
  return v;
}

double deviation_bound(const BoundFunction& l, double r) {
  if (!(l.quad_coef > 0.0)) throw std::invalid_argument("deviation bound needs a positive quadratic coefficient");
  const double arg = r - inverse_conjugate_of_bound(l, std::log(2.0));
  if (!(arg > 0.0)) return 1.0;
  return std::min(1.0, std::exp(-conjugate_of_bound(l, arg)));
}

DeviationReport deviation_check(const BrownianBatch& batch, const PathFunctional& x, const BoundFunction& l,
                                const std::vector<double>& r_grid) {
  DeviationReport out;
  out.claim = x.name;
  out.l = l;
  const auto xs = evaluate(x, batch);
  out.samples = xs.size();
  out.median = sample_median(xs);
  out.median_ci = median_interval(xs);
  for (double r : r_grid) {
    if (!(r > 0.0)) throw std::invalid_argument("deviation_check: r must be positive");
    DeviationRow row;
    row.r = r;
    const double threshold = out.median_ci.upper + r;
    row.exceed = static_cast<std::size_t>(std::count_if(xs.begin(), xs.end(), [&](double v) { return v > threshold; }));
    row.tail = static_cast<double>(row.exceed) / static_cast<double>(xs.size());
    row.ci = wilson_interval(row.exceed, xs.size());
    row.bound = deviation_bound(l, r);
    if (row.ci.lower <= row.bound)
      row.verdict = Verdict::Pass;
    else if (wilson_interval(row.exceed, xs.size(), 5.0).lower > row.bound)
      row.verdict = Verdict::Violation;
    else
      row.verdict = Verdict::Inconclusive;
    out.rows.push_back(row);
  }
  return out;
}

Verdict DimensionFreeReport::verdict() const {
  Verdict v = Verdict::Pass;
  for (const auto& r : rows) v = worst(v, r.verdict);
  return v;
}

DimensionFreeReport dimension_free_check(const RiskMeasureHandle& handle, const PathFunctional& x_template,
                                         const std::vector<std::size_t>& n_list, double lambda, const BoundFunction& l,
                                         const BrownianBatch& batch, std::size_t block_dim, double bias_constant) {
  if (n_list.empty()) throw std::invalid_argument("dimension_free_check: empty list of n");
  if (!(lambda >= 0.0)) throw std::domain_error("dimension_free_check: lambda must be nonnegative");
  const std::size_t n_max = *std::max_element(n_list.begin(), n_list.end());
  if (n_max == 0 || block_dim == 0) throw std::invalid_argument("dimension_free_check: n and block size must be >= 1");
  if (batch.dimension() < n_max * block_dim)
    throw std::invalid_argument("dimension_free_check: batch has too few coordinates for the largest n");
  validate_route(l.source, handle.generator(), x_template);

  DimensionFreeReport out;
  out.claim = x_template.name;
  out.lambda = lambda;
  out.l = l;
  std::vector<double> pooled;
  pooled.reserve(batch.samples() * n_max);
  for (std::size_t i = 0; i < n_max; ++i) {
    const auto xs = evaluate(x_template, batch.coordinate_block(i * block_dim, block_dim));
    pooled.insert(pooled.end(), xs.begin(), xs.end());
  }
  out.mean = mean_estimate(pooled);
  const double bound = lambda * out.mean.value + l(lambda);
  for (std::size_t n : n_list) {
    if (n == 0) throw std::invalid_argument("dimension_free_check: n must be >= 1");
    DimensionFreeRow row;
    row.n = n;
    auto v = risk_at(handle, block_average(x_template, n, block_dim), lambda, batch);
    row.value = v.value;
    row.scheme = v.scheme;
    row.bias = closed_form(v.scheme) ? 0.0 : regression_bias(bias_constant, lambda, batch.grid());
    row.bound = bound;
    row.margin = bound - row.value.value;
    row.error = combine_errors(row.value.error, lambda * out.mean.error);
    row.verdict = classify(row.margin, row.error + row.bias);
    out.rows.push_back(row);
  }
  for (const auto& r : out.rows) out.bound_constant = out.bound_constant && r.bound == bound;
  return out;
}

double gaussian_expectation(const std::function<double(double)>& f, double x, double tau) {
  if (!(tau >= 0.0)) throw std::domain_error("gaussian_expectation: variance must be nonnegative");
  if (tau == 0.0) return f(x);
  constexpr int kHalf = 12000;
  constexpr double kSpan = 12.0;
  const double h = kSpan / kHalf;
  const double sd = std::sqrt(tau);
  double acc = 0.0;
  for (int i = -kHalf; i <= kHalf; ++i) {
    const double u = i * h;
    const double w = (i == -kHalf || i == kHalf ? 0.5 : 1.0) * std::exp(-0.5 * u * u);
    acc += w * f(x + sd * u);
  }
  return acc * h / std::sqrt(2.0 * M_PI);
}

double gaussian_log_mgf(const std::function<double(double)>& f, double x, double tau) {
  if (!(tau >= 0.0)) throw std::domain_error("gaussian_log_mgf: variance must be nonnegative");
  if (tau == 0.0) return f(x);
  constexpr int kHalf = 12000;
  // Wider than for the mean: exp(f) tilts the mass outwards by up to the Lipschitz slope.
  constexpr double kSpan = 30.0;
  const double h = kSpan / kHalf;
  const double sd = std::sqrt(tau);
  std::vector<double> terms;
  terms.reserve(2 * kHalf + 1);
  double top = -kInfinity;
  for (int i = -kHalf; i <= kHalf; ++i) {
    const double u = i * h;
    const double t = f(x + sd * u) - 0.5 * u * u + (i == -kHalf || i == kHalf ? std::log(0.5) : 0.0);
    terms.push_back(t);
    top = std::max(top, t);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return top + std::log(acc * h / std::sqrt(2.0 * M_PI));
}

namespace {

// v(s, x) for v_t + v_xx / 2 + g(|v_x|) = 0 with the given terminal data on a grid centred at x.
double explicit_fd(const GeneratorSpec& g, const std::function<double(double)>& terminal, double tau, double x,
                   double half_width, double dx_target, double cfl) {
  std::size_t cells = static_cast<std::size_t>(std::ceil(2.0 * half_width / dx_target));
  cells += cells % 2;
  const double dx = 2.0 * half_width / static_cast<double>(cells);
  std::vector<double> v(cells + 1), next(cells + 1);
  for (std::size_t i = 0; i <= cells; ++i) v[i] = terminal(x - half_width + static_cast<double>(i) * dx);
  double slope = 0.0;
  for (std::size_t i = 0; i < cells; ++i) slope = std::max(slope, std::abs(v[i + 1] - v[i]) / dx);
  // Central differences in the gradient term stay monotone while the cell Peclet number is below 1.
  const double drift = g.z_lipschitz() < kInfinity ? g.z_lipschitz() : g.at(0.0, slope + 1.0) / (slope + 1.0) * 2.0;
  if (drift * dx > 1.0) throw std::domain_error("pde_check: space step too coarse for the gradient term");
  const std::size_t steps = static_cast<std::size_t>(std::ceil(tau / (cfl * dx * dx)));
  const double dt = tau / static_cast<double>(steps);
  const double inv_dx = 1.0 / dx;
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t i = 1; i < cells; ++i) {
      const double vx = 0.5 * (v[i + 1] - v[i - 1]) * inv_dx;
      const double vxx = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_dx * inv_dx;
      next[i] = v[i] + dt * (0.5 * vxx + g.at(0.0, std::abs(vx)));
    }
    next[0] = 2.0 * next[1] - next[2];
    next[cells] = 2.0 * next[cells - 1] - next[cells - 2];
    std::swap(v, next);
  }
  return v[cells / 2];
}

}  // namespace

bool PdeReport::pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const PdeRow& r) { return r.pass; });
}

PdeReport pde_check(const GeneratorSpec& g, const BoundFunction& l, const std::function<double(double)>& f,
                    double horizon, double s, double x, const std::vector<double>& lambdas,
                    const PdeOptions& options, const BrownianBatch* batch) {
  if (g.depends_on_y()) throw std::invalid_argument("pde_check: the generator must depend on z only");
  if (!(horizon > 0.0) || !(s >= 0.0 && s < horizon)) throw std::domain_error("pde_check: need 0 <= s < T");
  if (!(options.cfl > 0.0 && options.cfl <= 0.5))
    throw std::domain_error("pde_check: explicit scheme needs dt <= dx^2 / 2 (cfl in (0, 1/2])");
  if (!(options.dx > 0.0) || !(options.width > 0.0)) throw std::domain_error("pde_check: dx and width must be positive");
  const double tau = horizon - s;
  const double half_width = options.width * std::sqrt(horizon);
  const double m = gaussian_expectation(f, x, tau);

  PdeReport out;
  out.generator = g.describe();
  out.horizon = horizon;
  out.s = s;
  out.x = x;
  std::optional<RiskMeasureHandle> handle;
  PathFunctional claim;
  if (batch) {
    if (std::abs(batch->grid().horizon() - tau) > 1e-12 || batch->dimension() != 1)
      throw std::invalid_argument("pde_check: the Monte Carlo batch must be one-dimensional on [0, T - s]");
    handle.emplace(g);
    claim.name = "f(x+W)";
    claim.evaluate = [f, x](const PathView& p) {
      double w = 0.0;
      for (std::size_t k = 0; k < p.cells; ++k) w += p.increment(k, 0);
      return f(x + w);
    };
    claim.lipschitz_constant = 1.0;
    claim.classes = mask(ClaimClass::Lambda) | mask(ClaimClass::PathLipschitz);
    claim.features = {level_feature(0)};
  }
  for (double lambda : lambdas) {
    if (!(lambda >= 0.0)) throw std::domain_error("pde_check: lambda must be nonnegative");
    const double shift = lambda * m + l(lambda);
    auto terminal = [&](double y) { return lambda * f(y) - shift; };
    PdeRow row;
    row.lambda = lambda;
    row.coarse = explicit_fd(g, terminal, tau, x, half_width, options.dx, options.cfl);
    row.fine = explicit_fd(g, terminal, tau, x, half_width, 0.5 * options.dx, options.cfl);
    row.value = row.fine + (row.fine - row.coarse) / 3.0;
    row.budget = std::max(std::abs(row.fine - row.coarse) / 3.0, 1e-9 * (1.0 + std::abs(row.value)));
    row.reference = std::numeric_limits<double>::quiet_NaN();
    if (g.kind == GeneratorKind::Entropic)
      row.reference = gaussian_log_mgf([&](double y) { return lambda * f(y); }, x, tau) - shift;
    if (handle) {
      const Estimate e = handle->evaluate_risk(claim, lambda, *batch);
      row.monte_carlo = Estimate{e.value - shift, e.error};
    }
    row.pass = row.value <= row.budget;
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace dynrisk
