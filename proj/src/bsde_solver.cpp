#include "dynrisk/bsde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace dynrisk {

namespace {

constexpr double kDivergence = 1e12;

bool is_bad(double v) { return !std::isfinite(v) || std::abs(v) > kDivergence; }

BsdeSolution infinite_solution(const BrownianBatch& batch, std::string scheme) {
  BsdeSolution s;
  s.y0 = kInfinity;
  s.error = kInfinity;
  s.status = SolveStatus::SuspectedInfinite;
  s.scheme = std::move(scheme);
  s.grid = batch.grid();
  s.seed = batch.seed();
  return s;
}

}  // namespace

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Ok: return "ok";
    case SolveStatus::HeavyTail: return "heavy_tail";
    case SolveStatus::SuspectedInfinite: return "suspected_infinite";
  }
  return "?";
}

BsdeSolution solve_entropic(std::span<const double> v, const BrownianBatch& batch, const RegressionPlan* plan,
                            bool keep_paths) {
  const std::size_t m = v.size();
  if (m != batch.samples()) throw std::invalid_argument("solve_entropic: terminal values do not match the batch");
  BsdeSolution sol;
  sol.scheme = "entropic";
  sol.grid = batch.grid();
  sol.seed = batch.seed();

  const double shift = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(shift)) return infinite_solution(batch, "entropic");
  std::vector<double> w(m);
  double sw = 0.0, sw2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    w[i] = std::exp(v[i] - shift);
    sw += w[i];
    sw2 += w[i] * w[i];
  }
  const Estimate mw = mean_estimate(w);
  if (!(mw.value > 0.0) || !std::isfinite(mw.value)) return infinite_solution(batch, "entropic");
  sol.y0 = shift + std::log(mw.value);
  sol.error = mw.error / mw.value;
  // Effective sample size of the exponential weights; a handful of paths carrying the mean
  // means the second moment of e^X is not resolved.
  const double ess = sw * sw / sw2;
  if (ess < std::max(30.0, 1e-3 * static_cast<double>(m))) sol.status = SolveStatus::HeavyTail;

  if (keep_paths && plan != nullptr) {
    const std::size_t nodes = batch.grid().cells() + 1;
    sol.basis = plan->describe();
    sol.y_path.assign(m * nodes, 0.0);
    Eigen::MatrixXd rhs = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k + 1 < nodes; ++k) {
      const Eigen::MatrixXd fit = plan->project(k, rhs);
      for (std::size_t i = 0; i < m; ++i)
        sol.y_path[i * nodes + k] = shift + std::log(std::max(fit(static_cast<Eigen::Index>(i), 0), 1e-300));
    }
    for (std::size_t i = 0; i < m; ++i) sol.y_path[i * nodes + nodes - 1] = v[i];
    sol.reduced_basis = plan->reduced_basis();
  }
  return sol;
}

BsdeSolution solve_entropic(const PathFunctional& x, const BrownianBatch& batch) {
  auto v = evaluate(x, batch);
  return solve_entropic(v, batch);
}

BsdeSolution solve_regression(const GeneratorSpec& g, std::span<const double> terminal, const BrownianBatch& batch,
                              const RegressionPlan& plan, const SolverOptions& options, std::size_t terminal_node) {
  const std::size_t m = batch.samples();
  const std::size_t cells = batch.grid().cells();
  const std::size_t d = batch.dimension();
  if (terminal_node == static_cast<std::size_t>(-1)) terminal_node = cells;
  if (terminal_node > cells) throw std::invalid_argument("solve_regression: terminal node beyond the grid");
  if (terminal.size() != m) throw std::invalid_argument("solve_regression: terminal values do not match the batch");
  if (plan.samples() != m || plan.nodes() != cells + 1)
    throw std::invalid_argument("solve_regression: regression plan was built for another batch");
  if (!std::isfinite(g.z_lipschitz()))
    throw std::invalid_argument("solve_regression: generator must be Lipschitz in z (cap it first)");
  const double dt = batch.grid().step();
  if (g.growth().b * dt >= 1.0) throw std::domain_error("solve_regression: grid too coarse for the y-Lipschitz constant");

  BsdeSolution sol;
  sol.scheme = "regression";
  sol.grid = batch.grid();
  sol.seed = batch.seed();
  sol.basis = plan.describe();
  sol.picard_iters = options.picard_iters;
  sol.reduced_basis = plan.reduced_basis();

  const std::size_t nodes = terminal_node + 1;
  if (options.keep_paths) {
    sol.y_path.assign(m * nodes, 0.0);
    sol.z_path.assign(m * terminal_node * d, 0.0);
    for (std::size_t i = 0; i < m; ++i) sol.y_path[i * nodes + terminal_node] = terminal[i];
  }

  // R accumulates X + sum_{j >= k} (g_j dt - Z_j . dW_j) along each path. The subtracted
  // martingale increments have zero conditional mean, so E[R_{k+1} | F_k] = E[X + sum g dt | F_k]
  // for any fitted Z, while the regression targets lose most of their variance.
  Eigen::MatrixXd rr(static_cast<Eigen::Index>(m), 1);
  for (std::size_t i = 0; i < m; ++i) rr(static_cast<Eigen::Index>(i), 0) = terminal[i];
  Eigen::MatrixXd w(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  double y_first = 0.0;

  // Increments are stored path-major; stage them cell-major in blocks so each backward step
  // reads contiguous memory.
  constexpr std::size_t kBlock = 64;
  std::vector<double> staged;
  std::size_t block_first = terminal_node;
  const auto all = batch.data();

  for (std::size_t k = terminal_node; k-- > 0;) {
    if (k < block_first) {
      block_first = k + 1 >= kBlock ? k + 1 - kBlock : 0;
      const std::size_t width = (k + 1 - block_first) * d;
      staged.resize(width * m);
      for (std::size_t i = 0; i < m; ++i) {
        const double* src = all.data() + (i * cells + block_first) * d;
        for (std::size_t c = 0; c < width; ++c) staged[c * m + i] = src[c];
      }
    }
    const double* dw = staged.data() + (k - block_first) * d * m;  // dw[j * m + i]
    const auto proj = plan.projector(k);
    const Eigen::MatrixXd c = proj(rr);
    if (k == 0) {
      std::vector<double> sv(rr.data(), rr.data() + m);
      sol.error = std::sqrt(variance(sv) / static_cast<double>(m));
    }
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t i = 0; i < m; ++i)
        w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            (rr(static_cast<Eigen::Index>(i), 0) - c(static_cast<Eigen::Index>(i), 0)) * dw[j * m + i] / dt;
    const Eigen::MatrixXd z = proj(w);
    for (std::size_t i = 0; i < m; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      double zn = 0.0, mart = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double zj = z(ii, static_cast<Eigen::Index>(j));
        zn += zj * zj;
        mart += zj * dw[j * m + i];
      }
      zn = std::sqrt(zn);
      const double base = c(ii, 0);
      double y = base;
      for (unsigned it = 0; it < std::max(1u, options.picard_iters); ++it) y = base + g.at(y, zn) * dt;
      const double gk = g.at(y, zn);
      if (is_bad(y) || is_bad(gk)) return infinite_solution(batch, "regression");
      rr(ii, 0) += gk * dt - mart;
      if (k == 0 && i == 0) y_first = y;
      if (options.keep_paths) {
        sol.y_path[i * nodes + k] = y;
        for (std::size_t j = 0; j < d; ++j) sol.z_path[(i * terminal_node + k) * d + j] = z(ii, static_cast<Eigen::Index>(j));
      }
    }
  }

  // Node 0 carries no state information, so its regression is the plain average and Y_0 is
  // the same on every path.
  sol.y0 = terminal_node == 0 ? mean(terminal) : y_first;
  if (terminal_node == 0) sol.error = std::sqrt(variance(terminal) / static_cast<double>(m));
  return sol;
}

BsdeSolution solve_regression(const GeneratorSpec& g, const PathFunctional& x, const BrownianBatch& batch,
                              const SolverOptions& options) {
  auto plan = PlanCache::global().get(batch, x.features, options.regression);
  auto v = evaluate(x, batch);
  return solve_regression(g, v, batch, *plan, options);
}

RiskMeasureHandle::RiskMeasureHandle(GeneratorSpec g, SolverOptions options)
    : g_(std::move(g)), options_(options), normalized_(g_.normalized()) {}

GeneratorSpec RiskMeasureHandle::routed_generator(double horizon, double claim_lipschitz) const {
  switch (g_.kind) {
    case GeneratorKind::LipschitzZ:
    case GeneratorKind::Capped: return g_;
    case GeneratorKind::Superquadratic: {
      // |Z| <= e^{bT} Lip(X) a priori; freezing there instead of at T e^T leaves the solution unchanged
      // but stops regression noise in Z from being amplified by the superquadratic growth.
      const double apriori = std::exp(g_.b * horizon) * claim_lipschitz;
      if (apriori > 0.0 && apriori < cap_radius(horizon)) return cap_generator(g_, apriori);
      return cap_at_horizon(g_, horizon);
    }
    case GeneratorKind::Quadratic:
      if (g_.c == 0.0) return g_;
      [[fallthrough]];
    case GeneratorKind::Entropic:
      // |Z| stays below the claim's Lipschitz constant for these generators, so this cap is inactive
      // on the solution while keeping the scheme Lipschitz.
      return cap_generator(g_, std::max(cap_radius(horizon), 2.0 * claim_lipschitz));
  }
  return g_;
}

bool RiskMeasureHandle::cole_hopf_applies(const PathFunctional& x) const {
  return options_.cole_hopf && g_.kind == GeneratorKind::Quadratic && g_.c > 0.0 && (g_.b == 0.0 || x.nonneg);
}

BsdeSolution RiskMeasureHandle::solve(const PathFunctional& x, const BrownianBatch& batch, double lambda) const {
  if (!(lambda >= 0.0)) throw std::domain_error("risk evaluation needs lambda >= 0");
  auto v = evaluate(x, batch);
  for (double& e : v) e *= lambda;
  if (g_.kind == GeneratorKind::Entropic) return solve_entropic(v, batch);
  if (cole_hopf_applies(x)) {
    // With Y >= 0 the y^- term vanishes and u = exp(2c Y) solves a linear equation, so
    // E(X) = aT + log E[exp(2c X)] / (2c) exactly.
    const double twoc = 2.0 * g_.c;
    for (double& e : v) e *= twoc;
    BsdeSolution sol = solve_entropic(v, batch);
    sol.scheme = "cole_hopf";
    sol.y0 = g_.a * batch.grid().horizon() + sol.y0 / twoc;
    sol.error /= twoc;
    return sol;
  }
  auto plan = PlanCache::global().get(batch, x.features, options_.regression);
  const GeneratorSpec routed = routed_generator(batch.grid().horizon(), lambda * x.lipschitz_constant);
  return solve_regression(routed, v, batch, *plan, options_);
}

Estimate RiskMeasureHandle::evaluate_risk(const PathFunctional& x, double lambda, const BrownianBatch& batch) const {
  if (!(lambda >= 0.0)) throw std::domain_error("risk evaluation needs lambda >= 0");
  if (lambda == 0.0 && normalized_) return {0.0, 0.0};
  return solve(x, batch, lambda).estimate();
}

Estimate evaluate_risk(const RiskMeasureHandle& handle, const PathFunctional& x, double lambda,
                       const BrownianBatch& batch) {
  return handle.evaluate_risk(x, lambda, batch);
}

DominationReport check_kappa_domination(const RiskMeasureHandle& handle, double kappa, const PathFunctional& x1,
                                        const PathFunctional& x2, const BrownianBatch& batch) {
  if (!(kappa > 0.0)) throw std::domain_error("check_kappa_domination: kappa must be positive");
  const Estimate both = handle.evaluate_risk(sum(x1, x2), 1.0, batch);
  const Estimate first = handle.evaluate_risk(x1, 1.0, batch);
  const Estimate dom = RiskMeasureHandle(lipschitz_z(kappa), handle.options()).evaluate_risk(x2, 1.0, batch);
  DominationReport r;
  r.lhs = both.value - first.value;
  r.rhs = dom.value;
  r.margin = r.rhs - r.lhs;
  r.error = combine_errors(both.error, first.error, dom.error);
  r.pass = r.margin >= -3.0 * r.error;
  return r;
}

double supersolution_fraction(const BsdeSolution& sol, const GeneratorSpec& g, const BrownianBatch& batch,
                              double tolerance) {
  const std::size_t m = batch.samples();
  const std::size_t cells = batch.grid().cells();
  const std::size_t d = batch.dimension();
  if (sol.y_path.size() != m * (cells + 1) || sol.z_path.size() != m * cells * d)
    throw std::invalid_argument("supersolution_fraction: solution has no stored full-horizon paths");
  const double dt = batch.grid().step();
  std::size_t ok = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto inc = batch.increments(i);
    double acc = sol.y_path[i * (cells + 1)];
    for (std::size_t k = 0; k < cells; ++k) {
      const double* z = &sol.z_path[(i * cells + k) * d];
      acc -= g.evaluate(batch.grid().time(k), sol.y_path[i * (cells + 1) + k], std::span<const double>(z, d)) * dt;
      for (std::size_t j = 0; j < d; ++j) acc += z[j] * inc[k * d + j];
    }
    if (acc >= sol.y_path[i * (cells + 1) + cells] - tolerance) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(m);
}

bool AxiomReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const AxiomCheck& c) { return c.pass; });
}

AxiomReport axiom_suite(const RiskMeasureHandle& handle, const std::vector<PathFunctional>& claims,
                        const BrownianBatch& batch, std::size_t pairs, std::uint64_t seed, double bias) {
  if (claims.empty()) throw std::invalid_argument("axiom_suite: need at least one claim");
  AxiomReport rep;
  rep.generator = handle.generator().describe();
  if (!(bias >= 0.0)) throw std::invalid_argument("axiom_suite: bias budget must be nonnegative");
  auto add = [&](std::string name, double margin, double error) {
    rep.checks.push_back({std::move(name), margin, error, margin >= -(3.0 * error + bias) - 1e-12});
  };
  auto risk = [&](const PathFunctional& x) { return handle.evaluate_risk(x, 1.0, batch); };

  if (handle.normalization_checked()) {
    const Estimate zero = handle.solve(constant_claim(0.0), batch).estimate();
    add("normalization", -std::abs(zero.value), zero.error);
  }

  const PathFunctional& x0 = claims.front();
  const Estimate base = risk(x0);
  for (double m : {-1.0, 0.5, 2.0}) {
    const Estimate moved = risk(shifted(x0, m));
    const double err = combine_errors(moved.error, base.error);
    const double gap = moved.value - base.value - m;
    if (!handle.generator().depends_on_y()) {
      add("cash_additivity(m=" + std::to_string(m) + ")", -std::abs(gap), err);
    } else if (m >= 0.0) {
      add("cash_subadditivity(m=" + std::to_string(m) + ")", -gap, err);
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, claims.size() - 1);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  for (std::size_t p = 0; p < pairs; ++p) {
    const PathFunctional& a = claims[pick(rng)];
    const PathFunctional& b = claims[pick(rng)];
    const double u = unit(rng);
    const PathFunctional dominating = sum(a, scaled(positive_part(b), u));
    const Estimate hi = risk(dominating), lo = risk(a);
    add("monotonicity#" + std::to_string(p), hi.value - lo.value, combine_errors(hi.error, lo.error));

    const Estimate ea = risk(a), eb = risk(b), em = risk(mixture(a, b, u));
    const double chord = u * ea.value + (1.0 - u) * eb.value;
    add("convexity#" + std::to_string(p), chord - em.value, combine_errors(em.error, ea.error, eb.error));
  }

  // Time consistency: solving to the middle node from the conditional values Y_s reproduces Y_0.
  const std::size_t cells = batch.grid().cells();
  if (cells >= 2) {
    SolverOptions opts = handle.options();
    opts.keep_paths = true;
    auto plan = PlanCache::global().get(batch, x0.features, opts.regression);
    auto v = evaluate(x0, batch);
    const GeneratorSpec routed = handle.routed_generator(batch.grid().horizon(), x0.lipschitz_constant);
    const BsdeSolution full = solve_regression(routed, v, batch, *plan, opts);
    const std::size_t mid = cells / 2;
    std::vector<double> ys(batch.samples());
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = full.y_path[i * (cells + 1) + mid];
    opts.keep_paths = false;
    const BsdeSolution half = solve_regression(routed, ys, batch, *plan, opts, mid);
    add("tower", -std::abs(half.y0 - full.y0), combine_errors(half.error, full.error));
  }
  return rep;
}

}  // namespace dynrisk
