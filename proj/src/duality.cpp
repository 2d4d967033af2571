#include "dynrisk/duality.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dynrisk {

TiltSpec TiltSpec::constant(const TimeGrid& grid, std::vector<double> q, double beta) {
  if (q.empty()) throw std::invalid_argument("tilt: drift needs at least one coordinate");
  TiltSpec s;
  s.grid = grid;
  s.dimension = q.size();
  s.q.resize(grid.cells() * s.dimension);
  for (std::size_t k = 0; k < grid.cells(); ++k) std::copy(q.begin(), q.end(), s.q.begin() + static_cast<std::ptrdiff_t>(k * s.dimension));
  s.beta.assign(grid.cells(), beta);
  s.validate();
  return s;
}

TiltSpec TiltSpec::zero(const TimeGrid& grid, std::size_t dimension) {
  return constant(grid, std::vector<double>(dimension, 0.0), 0.0);
}

void TiltSpec::validate() const {
  if (dimension == 0) throw std::invalid_argument("tilt: dimension must be positive");
  if (q.size() != grid.cells() * dimension || beta.size() != grid.cells())
    throw std::invalid_argument("tilt: drift or rate does not match the grid");
  for (double v : q)
    if (!std::isfinite(v)) throw std::invalid_argument("tilt: drift must be finite");
  for (double b : beta)
    if (!(b >= 0.0) || !std::isfinite(b)) throw std::invalid_argument("tilt: discount rate must be finite and nonnegative");
}

double TiltSpec::q_norm(std::size_t cell) const {
  double s = 0.0;
  for (std::size_t j = 0; j < dimension; ++j) s += q_at(cell, j) * q_at(cell, j);
  return std::sqrt(s);
}

double TiltSpec::half_energy() const {
  double s = 0.0;
  for (double v : q) s += v * v;
  return 0.5 * s * grid.step();
}

double TiltSpec::discount_to(std::size_t node) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < node; ++k) acc += beta[k];
  return std::exp(-acc * grid.step());
}

double TiltSpec::discounted_integral(const std::vector<double>& per_cell) const {
  const double dt = grid.step();
  double total = 0.0;
  double log_d = 0.0;
  for (std::size_t k = 0; k < grid.cells(); ++k) {
    const double v = per_cell[k];
    if (v != 0.0) {
      if (std::isinf(v)) return v;
      const double b = beta[k];
      const double weight = b * dt < 1e-12 ? dt * (1.0 - 0.5 * b * dt) : -std::expm1(-b * dt) / b;
      total += std::exp(-log_d) * weight * v;
    }
    log_d += beta[k] * dt;
  }
  return total;
}

std::string TiltSpec::summary() const {
  double qmin = kInfinity, qmax = -kInfinity, bmax = 0.0;
  for (double v : q) {
    qmin = std::min(qmin, v);
    qmax = std::max(qmax, v);
  }
  for (double b : beta) bmax = std::max(bmax, b);
  std::ostringstream os;
  os.precision(6);
  os << "q in [" << qmin << ", " << qmax << "], d=" << dimension << ", beta max " << bmax;
  return os.str();
}

TiltSpec random_tilt(const TimeGrid& grid, std::size_t dimension, std::size_t pieces, double q_max, double beta_max,
                     std::uint64_t seed) {
  if (pieces == 0 || pieces > grid.cells()) throw std::invalid_argument("random_tilt: pieces must be in [1, cells]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uq(-q_max, q_max);
  std::uniform_real_distribution<double> ub(0.0, beta_max);
  TiltSpec s;
  s.grid = grid;
  s.dimension = dimension;
  s.q.resize(grid.cells() * dimension);
  s.beta.resize(grid.cells());
  const std::size_t cells = grid.cells();
  for (std::size_t p = 0; p < pieces; ++p) {
    std::vector<double> qp(dimension);
    for (double& v : qp) v = uq(rng);
    const double bp = beta_max > 0.0 ? ub(rng) : 0.0;
    for (std::size_t k = p * cells / pieces; k < (p + 1) * cells / pieces; ++k) {
      for (std::size_t j = 0; j < dimension; ++j) s.q[k * dimension + j] = qp[j];
      s.beta[k] = bp;
    }
  }
  s.validate();
  return s;
}

TiltedSample tilt(const BrownianBatch& batch, const TiltSpec& spec) {
  spec.validate();
  if (!(spec.grid == batch.grid()) || spec.dimension != batch.dimension())
    throw std::invalid_argument("tilt: specification does not match the batch grid or dimension");
  const std::size_t cells = batch.grid().cells();
  const std::size_t d = batch.dimension();
  TiltedSample ts;
  ts.closed_form_entropy = spec.half_energy();
  ts.discount = spec.discount_to(cells);
  ts.density.resize(batch.samples());
  const double compensator = ts.closed_form_entropy;
  for (std::size_t m = 0; m < batch.samples(); ++m) {
    const auto inc = batch.increments(m);
    double s = 0.0;
    for (std::size_t k = 0; k < cells * d; ++k) s += spec.q[k] * inc[k];
    ts.density[m] = std::exp(s - compensator);
  }
  ts.density_mean = mean_estimate(ts.density);
  return ts;
}

EntropyEstimate relative_entropy(const TiltedSample& ts) {
  std::vector<double> mlogm(ts.density.size());
  for (std::size_t i = 0; i < mlogm.size(); ++i) {
    const double m = ts.density[i];
    mlogm[i] = m > 0.0 ? m * std::log(m) : 0.0;
  }
  return {mean_estimate(mlogm), ts.closed_form_entropy};
}

double penalty(const GeneratorSpec& g, const TiltSpec& spec) {
  spec.validate();
  const std::size_t cells = spec.grid.cells();
  std::vector<double> per_cell(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    per_cell[k] = g.conjugate_norm(spec.beta[k], spec.q_norm(k));
    if (std::isinf(per_cell[k])) return kInfinity;
  }
  return spec.discounted_integral(per_cell);
}

Estimate dual_value(const GeneratorSpec& g, const TiltSpec& spec, const TiltedSample& ts, std::span<const double> x) {
  if (x.size() != ts.density.size()) throw std::invalid_argument("dual_value: claim values do not match the sample");
  const double alpha = penalty(g, spec);
  if (std::isinf(alpha)) return {-kInfinity, 0.0};
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) w[i] = ts.density[i] * ts.discount * x[i];
  const Estimate e = mean_estimate(w);
  return {e.value - alpha, e.error};
}

DualGapReport dual_gap(const RiskMeasureHandle& handle, const PathFunctional& x, const std::vector<TiltSpec>& specs,
                       const BrownianBatch& batch, double bias_budget) {
  if (specs.empty()) throw std::invalid_argument("dual_gap: need at least one tilt");
  DualGapReport rep;
  rep.primal = handle.evaluate_risk(x, 1.0, batch);
  const auto values = evaluate(x, batch);
  for (const auto& spec : specs) {
    const TiltedSample ts = tilt(batch, spec);
    DualEntry e;
    e.tilt = spec.summary();
    e.alpha = penalty(handle.generator(), spec);
    const Estimate dv = dual_value(handle.generator(), spec, ts, values);
    e.dual = dv.value;
    e.error = combine_errors(dv.error, rep.primal.error);
    e.gap = rep.primal.value - e.dual;
    e.pass = std::isinf(e.dual) || e.gap >= -3.0 * e.error - bias_budget;
    rep.best_dual = std::max(rep.best_dual, e.dual);
    rep.pass = rep.pass && e.pass;
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

namespace {

// Dual objective for q constant on equal time blocks, evaluated from per-block increment sums.
class BlockObjective {
 public:
  BlockObjective(const GeneratorSpec& g, const BrownianBatch& batch, std::span<const double> x, std::size_t blocks)
      : g_(g), grid_(batch.grid()), d_(batch.dimension()), blocks_(blocks), m_(batch.samples()), x_(x.begin(), x.end()) {
    const std::size_t cells = grid_.cells();
    sums_.assign(m_ * blocks_ * d_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      const auto inc = batch.increments(i);
      for (std::size_t k = 0; k < cells; ++k) {
        const std::size_t b = k * blocks_ / cells;
        for (std::size_t j = 0; j < d_; ++j) sums_[(i * blocks_ + b) * d_ + j] += inc[k * d_ + j];
      }
    }
  }

  TiltSpec spec(const std::vector<double>& q) const {
    TiltSpec s;
    s.grid = grid_;
    s.dimension = d_;
    s.q.resize(grid_.cells() * d_);
    s.beta.assign(grid_.cells(), 0.0);
    for (std::size_t k = 0; k < grid_.cells(); ++k) {
      const std::size_t b = k * blocks_ / grid_.cells();
      for (std::size_t j = 0; j < d_; ++j) s.q[k * d_ + j] = q[b * d_ + j];
    }
    return s;
  }

  Estimate operator()(const std::vector<double>& q) {
    ++evaluations;
    const TiltSpec s = spec(q);
    const double alpha = penalty(g_, s);
    if (std::isinf(alpha)) return {-kInfinity, 0.0};
    const double comp = s.half_energy();
    std::vector<double> w(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      double e = 0.0;
      for (std::size_t c = 0; c < blocks_ * d_; ++c) e += q[c] * sums_[i * blocks_ * d_ + c];
      w[i] = std::exp(e - comp) * x_[i];
    }
    const Estimate v = mean_estimate(w);
    return {v.value - alpha, v.error};
  }

  std::size_t evaluations = 0;

 private:
  const GeneratorSpec& g_;
  TimeGrid grid_;
  std::size_t d_, blocks_, m_;
  std::vector<double> x_;
  std::vector<double> sums_;
};

double search_radius(const GeneratorSpec& g) {
  switch (g.kind) {
    case GeneratorKind::LipschitzZ: return g.kappa;
    case GeneratorKind::Capped: return 0.0;
    case GeneratorKind::Superquadratic:
      return g.phi.power == 0.0 ? g.phi.coef : 4.0;
    default: return 4.0;
  }
}

}  // namespace

DualSearchResult dual_search(const GeneratorSpec& g, const PathFunctional& x, const BrownianBatch& batch,
                             std::size_t budget, std::size_t blocks) {
  blocks = std::clamp<std::size_t>(blocks, 1, batch.grid().cells());
  const auto values = evaluate(x, batch);
  const std::size_t d = batch.dimension();
  const double radius = search_radius(g);
  constexpr double kInvPhi = 0.6180339887498949;

  std::vector<double> q(blocks * d, 0.0);
  BlockObjective f(g, batch, values, blocks);
  Estimate best = f(q);

  // Golden-section on one direction: coordinates `coords` all set to t.
  auto line = [&](const std::vector<std::size_t>& coords, std::size_t iters) {
    double lo = -radius, hi = radius;
    auto at = [&](double t) {
      auto trial = q;
      for (std::size_t c : coords) trial[c] = t;
      return f(trial);
    };
    double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
    Estimate f1 = at(x1), f2 = at(x2);
    for (std::size_t it = 0; it < iters && f.evaluations < budget; ++it) {
      if (f1.value < f2.value) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + kInvPhi * (hi - lo);
        f2 = at(x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - kInvPhi * (hi - lo);
        f1 = at(x1);
      }
    }
    const double t = f1.value >= f2.value ? x1 : x2;
    const Estimate ft = f1.value >= f2.value ? f1 : f2;
    if (ft.value > best.value) {
      best = ft;
      for (std::size_t c : coords) q[c] = t;
    }
  };

  if (radius > 0.0) {
    // Constant drift first, one coordinate at a time, then each block separately.
    for (int sweep = 0; sweep < 2 && f.evaluations < budget; ++sweep)
      for (std::size_t j = 0; j < d && f.evaluations < budget; ++j) {
        std::vector<std::size_t> coords;
        for (std::size_t b = 0; b < blocks; ++b) coords.push_back(b * d + j);
        line(coords, 40);
      }
    if (blocks > 1)
      for (std::size_t c = 0; c < blocks * d && f.evaluations < budget; ++c) line({c}, 25);
  }
  return {f.spec(q), best, f.evaluations};
}

EntropyPenaltyCheck entropy_penalty_check(const GeneratorSpec& g, const TiltSpec& spec, const BrownianBatch& batch) {
  if (g.kind != GeneratorKind::Quadratic || !(g.c > 0.0))
    throw std::invalid_argument("entropy_penalty_check: needs a quadratic generator with c > 0");
  const double horizon = batch.grid().horizon();
  const TiltedSample ts = tilt(batch, spec);
  const EntropyEstimate h = relative_entropy(ts);
  EntropyPenaltyCheck r;
  r.alpha = penalty(g, spec);
  r.entropy = h.plug_in.value;
  r.entropy_error = h.plug_in.error;
  const double factor = std::exp(-g.b * horizon) / (2.0 * g.c);
  r.lhs = r.alpha + g.a * horizon;
  r.rhs = factor * r.entropy;
  r.margin = r.lhs - r.rhs;
  r.error = factor * r.entropy_error;
  r.pass = std::isinf(r.alpha) || r.margin >= -3.0 * r.error;
  return r;
}

}  // namespace dynrisk
