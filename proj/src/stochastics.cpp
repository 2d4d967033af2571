#include "dynrisk/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>

namespace dynrisk {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// Counter-based stream: the k-th output is mix64(key + k * golden). Any path's stream can be
/// regenerated without touching the others.
class CounterStream {
 public:
  using result_type = std::uint64_t;
  explicit CounterStream(std::uint64_t key) : key_(key) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return mix64(key_ + (++counter_) * kGolden); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t fnv1a(std::span<const double> values) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

constexpr unsigned kAllClasses = 0x1F;

unsigned with_plus(unsigned classes) {
  if (classes & mask(ClaimClass::Lambda)) classes |= mask(ClaimClass::LambdaPlus);
  if (classes & mask(ClaimClass::LambdaPrime)) classes |= mask(ClaimClass::LambdaPrimePlus);
  return classes;
}

unsigned without_plus(unsigned classes) {
  return classes & ~(mask(ClaimClass::LambdaPlus) | mask(ClaimClass::LambdaPrimePlus));
}

ClaimClass primary_tag(unsigned classes, ClaimClass fallback) {
  for (ClaimClass c : {ClaimClass::PathLipschitz, ClaimClass::LambdaPlus, ClaimClass::Lambda,
                       ClaimClass::LambdaPrimePlus, ClaimClass::LambdaPrime}) {
    if ((classes & mask(c)) && c == fallback) return c;
  }
  for (ClaimClass c : {ClaimClass::LambdaPlus, ClaimClass::Lambda, ClaimClass::LambdaPrimePlus,
                       ClaimClass::LambdaPrime, ClaimClass::PathLipschitz}) {
    if (classes & mask(c)) return c;
  }
  return fallback;
}

std::vector<Feature> merge_features(const std::vector<Feature>& a, const std::vector<Feature>& b) {
  std::vector<Feature> out = a;
  for (const auto& f : b) {
    bool seen = std::any_of(out.begin(), out.end(), [&](const Feature& g) { return g.key == f.key; });
    if (!seen) out.push_back(f);
  }
  return out;
}

/// Extracts coordinates [first, first + count) of a path into buf and returns a view of it.
PathView sub_view(const PathView& p, std::size_t first, std::size_t count, std::vector<double>& buf) {
  buf.resize(p.cells * count);
  for (std::size_t k = 0; k < p.cells; ++k)
    for (std::size_t j = 0; j < count; ++j) buf[k * count + j] = p.increment(k, first + j);
  return PathView{buf, p.cells, count, p.step};
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

TimeGrid::TimeGrid(double horizon, unsigned levels) : horizon_(horizon), levels_(levels) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::domain_error("TimeGrid: horizon must be positive");
  if (levels > kMaxLevels) throw std::domain_error("TimeGrid: at most 2^20 cells");
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> t(cells() + 1);
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = time(k);
  t.back() = horizon_;
  return t;
}

std::vector<double> PathView::levels() const {
  std::vector<double> out((cells + 1) * dimension, 0.0);
  for (std::size_t k = 0; k < cells; ++k)
    for (std::size_t j = 0; j < dimension; ++j)
      out[(k + 1) * dimension + j] = out[k * dimension + j] + increment(k, j);
  return out;
}

BrownianBatch::BrownianBatch(TimeGrid grid, std::size_t dimension, std::size_t samples, std::uint64_t seed,
                             std::vector<double> increments)
    : grid_(grid), dimension_(dimension), samples_(samples), seed_(seed), increments_(std::move(increments)) {
  if (dimension_ == 0 || samples_ == 0) throw std::domain_error("BrownianBatch: dimension and sample count must be >= 1");
  if (increments_.size() != samples_ * row_size()) throw std::invalid_argument("BrownianBatch: increment array has wrong size");
}

std::span<const double> BrownianBatch::increments(std::size_t path) const {
  return std::span<const double>(increments_).subspan(path * row_size(), row_size());
}

PathView BrownianBatch::path(std::size_t i) const { return PathView{increments(i), grid_.cells(), dimension_, grid_.step()}; }

BrownianBatch BrownianBatch::coarsened(unsigned levels) const {
  if (levels > grid_.levels()) throw std::domain_error("coarsened: target grid is finer than the batch");
  const std::size_t block = std::size_t{1} << (grid_.levels() - levels);
  TimeGrid coarse(grid_.horizon(), levels);
  const std::size_t ccells = coarse.cells();
  std::vector<double> out(samples_ * ccells * dimension_, 0.0);
  for (std::size_t m = 0; m < samples_; ++m) {
    auto row = increments(m);
    double* dst = out.data() + m * ccells * dimension_;
    for (std::size_t k = 0; k < grid_.cells(); ++k)
      for (std::size_t j = 0; j < dimension_; ++j) dst[(k / block) * dimension_ + j] += row[k * dimension_ + j];
  }
  return BrownianBatch(coarse, dimension_, samples_, seed_, std::move(out));
}

BrownianBatch BrownianBatch::coordinate_block(std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > dimension_) throw std::domain_error("coordinate_block: block out of range");
  std::vector<double> out(samples_ * grid_.cells() * count);
  for (std::size_t m = 0; m < samples_; ++m) {
    auto row = increments(m);
    for (std::size_t k = 0; k < grid_.cells(); ++k)
      for (std::size_t j = 0; j < count; ++j)
        out[(m * grid_.cells() + k) * count + j] = row[k * dimension_ + first + j];
  }
  return BrownianBatch(grid_, count, samples_, seed_, std::move(out));
}

BrownianBatch simulate(const TimeGrid& grid, std::size_t dimension, std::size_t samples, std::uint64_t seed) {
  return simulate_range(grid, dimension, 0, samples, seed);
}

BrownianBatch simulate_range(const TimeGrid& grid, std::size_t dimension, std::size_t first, std::size_t count,
                             std::uint64_t seed) {
  if (dimension == 0 || count == 0) throw std::domain_error("simulate: dimension and sample count must be >= 1");
  const std::size_t row = grid.cells() * dimension;
  if (row > std::size_t{1} << 31 || count > (std::size_t{1} << 34) / row)
    throw std::length_error("simulate: batch exceeds the memory budget");
  std::vector<double> inc(count * row);
  const double scale = std::sqrt(grid.step());
  const std::uint64_t root = mix64(seed);
  for (std::size_t m = 0; m < count; ++m) {
    CounterStream stream(mix64(root ^ mix64(static_cast<std::uint64_t>(first + m))));
    std::normal_distribution<double> normal;
    double* dst = inc.data() + m * row;
    for (std::size_t c = 0; c < row; ++c) dst[c] = scale * normal(stream);
  }
  return BrownianBatch(grid, dimension, count, seed, std::move(inc));
}

DiscretizationStudy discretization_error(const PathMap& phi, const std::vector<unsigned>& levels, unsigned fine_levels,
                                         std::size_t samples, std::uint64_t seed, double p, std::size_t dimension) {
  if (levels.size() < 2) throw std::invalid_argument("discretization_error: need at least two levels");
  for (unsigned n : levels)
    if (n >= fine_levels) throw std::invalid_argument("discretization_error: levels must be below the reference level");
  const TimeGrid fine(1.0, fine_levels);
  const std::size_t cells = fine.cells();
  std::vector<std::vector<double>> errs(levels.size());
  constexpr std::size_t kChunk = 512;
  std::vector<double> knots((cells + 1) * dimension), coarse;
  for (std::size_t first = 0; first < samples; first += kChunk) {
    const auto batch = simulate_range(fine, dimension, first, std::min(kChunk, samples - first), seed);
    for (std::size_t m = 0; m < batch.samples(); ++m) {
      const auto inc = batch.increments(m);
      std::fill(knots.begin(), knots.begin() + static_cast<std::ptrdiff_t>(dimension), 0.0);
      for (std::size_t k = 0; k < cells; ++k)
        for (std::size_t j = 0; j < dimension; ++j) knots[(k + 1) * dimension + j] = knots[k * dimension + j] + inc[k * dimension + j];
      const double reference = phi.evaluate(knots, dimension);
      for (std::size_t li = 0; li < levels.size(); ++li) {
        const std::size_t stride = std::size_t{1} << (fine_levels - levels[li]);
        coarse.clear();
        for (std::size_t k = 0; k <= cells; k += stride)
          coarse.insert(coarse.end(), knots.begin() + static_cast<std::ptrdiff_t>(k * dimension),
                        knots.begin() + static_cast<std::ptrdiff_t>((k + 1) * dimension));
        errs[li].push_back(std::pow(std::abs(reference - phi.evaluate(coarse, dimension)), p));
      }
    }
  }
  DiscretizationStudy study;
  study.levels = levels;
  study.fine_levels = fine_levels;
  study.p = p;
  std::vector<double> lx, ly;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    study.moments.push_back(mean_estimate(errs[li]));
    lx.push_back(static_cast<double>(levels[li]) * std::log(2.0));
    ly.push_back(std::log(std::max(study.moments.back().value, 1e-300)));
  }
  study.slope = regression_slope(lx, ly);
  return study;
}

std::string to_string(ClaimClass c) {
  switch (c) {
    case ClaimClass::Lambda: return "Lambda";
    case ClaimClass::LambdaPlus: return "LambdaPlus";
    case ClaimClass::LambdaPrime: return "LambdaPrime";
    case ClaimClass::LambdaPrimePlus: return "LambdaPrimePlus";
    case ClaimClass::PathLipschitz: return "PathLipschitz";
  }
  return "?";
}

unsigned mask(ClaimClass c) { return static_cast<unsigned>(c); }

std::vector<double> evaluate(const PathFunctional& x, const BrownianBatch& batch) {
  std::vector<double> out(batch.samples());
  for (std::size_t m = 0; m < batch.samples(); ++m) out[m] = x.evaluate(batch.path(m));
  return out;
}

Feature level_feature(std::size_t dim) {
  return {"level:" + std::to_string(dim), [dim](const PathView& p, std::span<double> traj) {
            traj[0] = 0.0;
            for (std::size_t k = 0; k < p.cells; ++k) traj[k + 1] = traj[k] + p.increment(k, dim);
          }};
}

Feature running_max_feature(std::size_t dim) {
  return {"max:" + std::to_string(dim), [dim](const PathView& p, std::span<double> traj) {
            double level = 0.0;
            traj[0] = 0.0;
            for (std::size_t k = 0; k < p.cells; ++k) {
              level += p.increment(k, dim);
              traj[k + 1] = std::max(traj[k], level);
            }
          }};
}

Feature running_integral_feature(std::size_t dim) {
  return {"integral:" + std::to_string(dim), [dim](const PathView& p, std::span<double> traj) {
            double level = 0.0;
            traj[0] = 0.0;
            for (std::size_t k = 0; k < p.cells; ++k) {
              double next = level + p.increment(k, dim);
              traj[k + 1] = traj[k] + 0.5 * (level + next) * p.step;
              level = next;
            }
          }};
}

Feature weighted_level_feature(std::string key, std::vector<double> weights, std::size_t dimension) {
  return {std::move(key), [w = std::move(weights), dimension](const PathView& p, std::span<double> traj) {
            if (w.size() != p.cells * dimension || p.dimension != dimension)
              throw std::invalid_argument("weighted_level_feature: grid or dimension mismatch");
            traj[0] = 0.0;
            for (std::size_t k = 0; k < p.cells; ++k) {
              double s = 0.0;
              for (std::size_t j = 0; j < dimension; ++j) s += w[k * dimension + j] * p.increment(k, j);
              traj[k + 1] = traj[k] + s;
            }
          }};
}

PathMap terminal_value_map(std::size_t dim) {
  return {"terminal", [dim](std::span<const double> knots, std::size_t d) { return knots[knots.size() - d + dim]; },
          false, {level_feature(dim)}};
}

PathMap running_sup_map(std::size_t dim) {
  return {"running_sup",
          [dim](std::span<const double> knots, std::size_t d) {
            double best = knots[dim];
            for (std::size_t k = dim; k < knots.size(); k += d) best = std::max(best, knots[k]);
            return best;
          },
          true, {level_feature(dim), running_max_feature(dim)}};
}

PathMap time_average_map(double horizon, std::size_t dim) {
  // Knots are equally spaced, so the average does not depend on the horizon.
  (void)horizon;
  return {"time_average",
          [dim](std::span<const double> knots, std::size_t d) {
            const std::size_t n = knots.size() / d - 1;
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += 0.5 * (knots[k * d + dim] + knots[(k + 1) * d + dim]);
            return acc / static_cast<double>(n);
          },
          false, {level_feature(dim), running_integral_feature(dim)}};
}

PathMap abs_terminal_map(std::size_t dim) {
  return {"abs_terminal",
          [dim](std::span<const double> knots, std::size_t d) { return std::abs(knots[knots.size() - d + dim]); }, true,
          {level_feature(dim)}};
}

PathFunctional discretize_path_functional(const PathMap& phi, const TimeGrid& grid, std::size_t dimension) {
  if (dimension == 0) throw std::domain_error("discretize_path_functional: dimension must be >= 1");
  (void)grid;
  PathFunctional x;
  x.name = phi.name;
  x.evaluate = [f = phi.evaluate](const PathView& p) {
    auto knots = p.levels();
    return f(knots, p.dimension);
  };
  x.lipschitz_constant = 1.0;
  x.nonneg = phi.nonneg;
  // The built-in maps read a single coordinate, so the sup-norm bound transfers to both
  // finite-dimensional norms for any dimension.
  unsigned classes = mask(ClaimClass::PathLipschitz) | mask(ClaimClass::Lambda) | mask(ClaimClass::LambdaPrime);
  x.classes = phi.nonneg ? with_plus(classes) : classes;
  x.class_tag = ClaimClass::LambdaPrime;
  x.features = phi.features;
  return x;
}

PathFunctional log_contract(double s0, const std::function<double(double)>& drift,
                            const std::function<std::vector<double>(double)>& volatility, const TimeGrid& grid,
                            std::size_t dimension) {
  if (!(s0 > 0.0)) throw std::domain_error("log_contract: S0 must be positive");
  const std::size_t n = grid.cells();
  const double dt = grid.step();
  std::vector<double> sigma(n * dimension);
  double deterministic = std::log(s0);
  double incr_lip = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = grid.time(k);
    auto s = volatility(t);
    if (s.size() != dimension) throw std::invalid_argument("log_contract: volatility has wrong dimension");
    double norm2 = 0.0;
    for (std::size_t j = 0; j < dimension; ++j) {
      if (!(std::abs(s[j]) <= 1.0)) throw std::domain_error("log_contract: volatility components must lie in [-1,1]");
      sigma[k * dimension + j] = s[j];
      norm2 += s[j] * s[j];
    }
    deterministic += (drift(t) - 0.5 * norm2) * dt;
    incr_lip = std::max(incr_lip, std::sqrt(norm2));
  }
  // Coefficient of level W_{t_j} in sum_k sigma_k (W_{t_{k+1}} - W_{t_k}).
  double level_lip2 = 0.0;
  for (std::size_t j = 1; j <= n; ++j)
    for (std::size_t i = 0; i < dimension; ++i) {
      double c = sigma[(j - 1) * dimension + i] - (j < n ? sigma[j * dimension + i] : 0.0);
      level_lip2 += c * c;
    }
  const double level_lip = std::sqrt(level_lip2);

  PathFunctional x;
  x.name = "log_contract";
  x.evaluate = [sigma, deterministic, dimension, n](const PathView& p) {
    if (p.cells != n || p.dimension != dimension) throw std::invalid_argument("log_contract: batch grid mismatch");
    double acc = deterministic;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < dimension; ++j) acc += sigma[k * dimension + j] * p.increment(k, j);
    return acc;
  };
  x.lipschitz_constant = std::max(level_lip, incr_lip);
  x.nonneg = false;
  unsigned classes = 0;
  if (level_lip <= 1.0 + 1e-12) classes |= mask(ClaimClass::Lambda);
  if (incr_lip <= 1.0 + 1e-12) classes |= mask(ClaimClass::LambdaPrime);
  x.classes = classes;
  x.class_tag = primary_tag(classes, ClaimClass::Lambda);
  x.features = {weighted_level_feature("stoch_integral:" + std::to_string(fnv1a(sigma)), sigma, dimension)};
  return x;
}

PathFunctional terminal_claim(std::size_t dim) {
  auto x = discretize_path_functional(terminal_value_map(dim), TimeGrid(1.0, 0));
  x.name = "W_T";
  return x;
}

PathFunctional running_max_claim(std::size_t dim) {
  auto x = discretize_path_functional(running_sup_map(dim), TimeGrid(1.0, 0));
  x.name = "grid_max";
  return x;
}

PathFunctional abs_terminal_claim(std::size_t dim) {
  auto x = discretize_path_functional(abs_terminal_map(dim), TimeGrid(1.0, 0));
  x.name = "abs_W_T";
  return x;
}

PathFunctional constant_claim(double value) {
  PathFunctional x;
  x.name = "constant";
  x.evaluate = [value](const PathView&) { return value; };
  x.lipschitz_constant = 0.0;
  x.nonneg = value >= 0.0;
  x.classes = x.nonneg ? kAllClasses : without_plus(kAllClasses);
  x.class_tag = ClaimClass::Lambda;
  return x;
}

PathFunctional positive_part(const PathFunctional& x, double shift) {
  PathFunctional y = x;
  y.name = "(" + x.name + "+" + std::to_string(shift) + ")+";
  y.evaluate = [f = x.evaluate, shift](const PathView& p) { return std::max(f(p) + shift, 0.0); };
  y.nonneg = true;
  y.classes = with_plus(x.classes);
  y.class_tag = primary_tag(y.classes, x.class_tag == ClaimClass::Lambda ? ClaimClass::LambdaPlus : x.class_tag);
  return y;
}

PathFunctional scaled(const PathFunctional& x, double factor) {
  if (!(factor >= 0.0)) throw std::domain_error("scaled: factor must be nonnegative (use negated)");
  PathFunctional y = x;
  y.name = std::to_string(factor) + "*" + x.name;
  y.evaluate = [f = x.evaluate, factor](const PathView& p) { return factor * f(p); };
  y.lipschitz_constant = factor * x.lipschitz_constant;
  if (y.lipschitz_constant > 1.0 + 1e-12) y.classes = 0;
  return y;
}

PathFunctional shifted(const PathFunctional& x, double offset) {
  PathFunctional y = x;
  y.name = x.name + "+" + std::to_string(offset);
  y.evaluate = [f = x.evaluate, offset](const PathView& p) { return f(p) + offset; };
  y.nonneg = x.nonneg && offset >= 0.0;
  if (!y.nonneg) y.classes = without_plus(x.classes);
  return y;
}

PathFunctional negated(const PathFunctional& x) {
  PathFunctional y = x;
  y.name = "-" + x.name;
  y.evaluate = [f = x.evaluate](const PathView& p) { return -f(p); };
  y.nonneg = false;
  y.classes = without_plus(x.classes);
  y.class_tag = primary_tag(y.classes, x.class_tag);
  return y;
}

PathFunctional sum(const PathFunctional& a, const PathFunctional& b) {
  PathFunctional y;
  y.name = a.name + "+" + b.name;
  y.evaluate = [fa = a.evaluate, fb = b.evaluate](const PathView& p) { return fa(p) + fb(p); };
  y.lipschitz_constant = a.lipschitz_constant + b.lipschitz_constant;
  y.nonneg = a.nonneg && b.nonneg;
  y.classes = y.lipschitz_constant <= 1.0 + 1e-12 ? (a.classes & b.classes) : 0;
  y.class_tag = primary_tag(y.classes, a.class_tag);
  y.features = merge_features(a.features, b.features);
  return y;
}

PathFunctional mixture(const PathFunctional& a, const PathFunctional& b, double mu) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw std::domain_error("mixture: weight must lie in [0,1]");
  PathFunctional y;
  y.name = "mix(" + a.name + "," + b.name + ")";
  y.evaluate = [fa = a.evaluate, fb = b.evaluate, mu](const PathView& p) { return mu * fa(p) + (1.0 - mu) * fb(p); };
  y.lipschitz_constant = mu * a.lipschitz_constant + (1.0 - mu) * b.lipschitz_constant;
  y.nonneg = a.nonneg && b.nonneg;
  y.classes = a.classes & b.classes;
  y.class_tag = primary_tag(y.classes, a.class_tag);
  y.features = merge_features(a.features, b.features);
  return y;
}

PathFunctional block_average(const PathFunctional& block_claim, std::size_t blocks, std::size_t block_dim) {
  if (blocks == 0 || block_dim == 0) throw std::domain_error("block_average: need at least one block");
  PathFunctional y = block_claim;
  y.name = "avg" + std::to_string(blocks) + "(" + block_claim.name + ")";
  y.evaluate = [f = block_claim.evaluate, blocks, block_dim](const PathView& p) {
    if (p.dimension < blocks * block_dim) throw std::invalid_argument("block_average: batch has too few coordinates");
    std::vector<double> buf;
    double acc = 0.0;
    for (std::size_t i = 0; i < blocks; ++i) acc += f(sub_view(p, i * block_dim, block_dim, buf));
    return acc / static_cast<double>(blocks);
  };
  y.features.clear();
  for (std::size_t i = 0; i < blocks; ++i) {
    for (const auto& feat : block_claim.features) {
      y.features.push_back({"block" + std::to_string(i) + "/" + feat.key,
                            [fill = feat.fill, i, block_dim](const PathView& p, std::span<double> traj) {
                              std::vector<double> buf;
                              fill(sub_view(p, i * block_dim, block_dim, buf), traj);
                            }});
    }
  }
  return y;
}

double empirical_lipschitz(const PathFunctional& x, ClaimClass norm, const TimeGrid& grid, std::size_t dimension,
                           std::size_t pairs, std::uint64_t seed) {
  const std::size_t n = grid.cells();
  const std::size_t row = n * dimension;
  CounterStream stream(mix64(seed ^ 0x5EEDULL));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(-3.0, 0.5);
  const double s = std::sqrt(grid.step());
  std::vector<double> a(row), b(row);
  double worst = 0.0;
  for (std::size_t t = 0; t < pairs; ++t) {
    const double eps = std::pow(10.0, unif(stream)) * s;
    for (std::size_t c = 0; c < row; ++c) {
      a[c] = s * normal(stream);
      b[c] = a[c] + eps * normal(stream);
    }
    PathView pa{a, n, dimension, grid.step()}, pb{b, n, dimension, grid.step()};
    const double df = std::abs(x.evaluate(pa) - x.evaluate(pb));
    double dist = 0.0;
    switch (norm) {
      case ClaimClass::Lambda:
      case ClaimClass::LambdaPlus: {
        auto la = pa.levels(), lb = pb.levels();
        for (std::size_t c = 0; c < la.size(); ++c) dist += (la[c] - lb[c]) * (la[c] - lb[c]);
        dist = std::sqrt(dist);
        break;
      }
      case ClaimClass::LambdaPrime:
      case ClaimClass::LambdaPrimePlus:
        for (std::size_t k = 0; k < n; ++k) {
          double cell = 0.0;
          for (std::size_t j = 0; j < dimension; ++j) {
            double d = a[k * dimension + j] - b[k * dimension + j];
            cell += d * d;
          }
          dist += std::sqrt(cell);
        }
        break;
      case ClaimClass::PathLipschitz: {
        auto la = pa.levels(), lb = pb.levels();
        for (std::size_t j = 0; j < dimension; ++j) {
          double sup = 0.0;
          for (std::size_t k = 0; k <= n; ++k) sup = std::max(sup, std::abs(la[k * dimension + j] - lb[k * dimension + j]));
          dist += sup;
        }
        break;
      }
    }
    if (dist > 0.0) worst = std::max(worst, df / dist);
  }
  return worst;
}

}  // namespace dynrisk
