#include "dynrisk/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "dynrisk/concentration.hpp"
#include "dynrisk/duality.hpp"
#include "dynrisk/transport.hpp"

namespace dynrisk {

namespace {

constexpr const char* kFormatVersion = "1";

// ---------------------------------------------------------------------------------------------
// Config reading with field paths in every diagnostic.

class Node {
 public:
  Node(const Json& j, std::string path, const std::string* origin) : j_(&j), path_(std::move(path)), origin_(origin) {}

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(*origin_ + ": " + path_ + ": " + msg); }

  const std::string& path() const { return path_; }
  const Json& raw() const { return *j_; }
  bool is_object() const { return j_->is_object(); }
  bool is_array() const { return j_->is_array(); }
  bool is_string() const { return j_->is_string(); }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  Node at(const std::string& key) const {
    if (!j_->is_object()) fail("expected an object");
    auto it = j_->find(key);
    if (it == j_->end()) fail("missing required field '" + key + "'");
    return Node(*it, path_ + "." + key, origin_);
  }

  std::optional<Node> find(const std::string& key) const {
    if (!j_->is_object()) fail("expected an object");
    auto it = j_->find(key);
    if (it == j_->end()) return std::nullopt;
    return Node(*it, path_ + "." + key, origin_);
  }

  void expect_keys(std::initializer_list<const char*> keys) const {
    if (!j_->is_object()) fail("expected an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!allowed.count(it.key())) fail("unknown field '" + it.key() + "'");
  }

  std::vector<Node> items() const {
    if (!j_->is_array()) fail("expected an array");
    std::vector<Node> out;
    for (std::size_t i = 0; i < j_->size(); ++i)
      out.emplace_back((*j_)[i], path_ + "[" + std::to_string(i) + "]", origin_);
    return out;
  }

  std::string str() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }

  bool boolean() const {
    if (!j_->is_boolean()) fail("expected true or false");
    return j_->get<bool>();
  }

  // Numerics are decimal strings so that the file, not a float parser, pins the value.
  double number() const {
    if (!j_->is_string()) fail("numbers must be written as decimal strings, e.g. \"0.5\"");
    const auto s = j_->get<std::string>();
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
      fail("'" + s + "' is not a finite decimal number");
    return v;
  }

  double number_in(double lo, double hi) const {
    const double v = number();
    if (!(v >= lo && v <= hi)) {
      std::ostringstream os;
      os << "value " << v << " outside [" << lo << ", " << hi << "]";
      fail(os.str());
    }
    return v;
  }

  std::uint64_t integer(std::uint64_t lo = 0, std::uint64_t hi = UINT64_MAX) const {
    if (!j_->is_string()) fail("integers must be written as decimal strings, e.g. \"42\"");
    const auto s = j_->get<std::string>();
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail("'" + s + "' is not a nonnegative integer");
    if (v < lo || v > hi) fail("value " + s + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
  }

  std::vector<double> numbers() const {
    std::vector<double> out;
    for (const auto& n : items()) out.push_back(n.number());
    return out;
  }

 private:
  const Json* j_;
  std::string path_;
  const std::string* origin_;
};

double opt_number(const Node& n, const char* key, double fallback) {
  auto f = n.find(key);
  return f ? f->number() : fallback;
}

std::uint64_t opt_integer(const Node& n, const char* key, std::uint64_t fallback, std::uint64_t lo = 0,
                          std::uint64_t hi = UINT64_MAX) {
  auto f = n.find(key);
  return f ? f->integer(lo, hi) : fallback;
}

GeneratorSpec parse_generator(const Node& n, const std::map<std::string, GeneratorSpec>& known) {
  const std::string kind = n.at("kind").str();
  try {
    if (kind == "entropic") {
      n.expect_keys({"id", "kind"});
      return entropic();
    }
    if (kind == "lipschitz") {
      n.expect_keys({"id", "kind", "kappa"});
      return lipschitz_z(n.at("kappa").number());
    }
    if (kind == "quadratic") {
      n.expect_keys({"id", "kind", "a", "b", "c"});
      return quadratic(opt_number(n, "a", 0.0), opt_number(n, "b", 0.0), n.at("c").number());
    }
    if (kind == "superquadratic") {
      n.expect_keys({"id", "kind", "p", "b", "coef"});
      const double p = n.at("p").number();
      const double coef = opt_number(n, "coef", 1.0);
      return superquadratic(opt_number(n, "b", 0.0), {coef, p}, {coef * p, p - 1.0});
    }
    if (kind == "capped") {
      n.expect_keys({"id", "kind", "of", "radius", "horizon"});
      const std::string of = n.at("of").str();
      auto it = known.find(of);
      if (it == known.end()) n.at("of").fail("unknown generator '" + of + "' (declare it earlier)");
      if (n.has("radius")) return cap_generator(it->second, n.at("radius").number());
      return cap_at_horizon(it->second, n.at("horizon").number());
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    n.fail(e.what());
  }
  n.at("kind").fail("unknown generator kind '" + kind +
                    "' (entropic, lipschitz, quadratic, superquadratic, capped)");
}

ClaimFactory parse_claim(const Node& n, const std::map<std::string, ClaimFactory>& known) {
  n.expect_keys({"id", "kind", "dim", "s0", "drift", "sigma", "of", "value", "negate", "positive_part", "shift",
                 "scale", "map"});
  const std::string kind = n.at("kind").str();
  const std::size_t dim = opt_integer(n, "dim", 0, 0, 1024);
  ClaimFactory base;
  if (kind == "terminal") {
    base = [dim](const TimeGrid&, std::size_t) { return terminal_claim(dim); };
  } else if (kind == "grid_max") {
    base = [dim](const TimeGrid&, std::size_t) { return running_max_claim(dim); };
  } else if (kind == "abs_terminal") {
    base = [dim](const TimeGrid&, std::size_t) { return abs_terminal_claim(dim); };
  } else if (kind == "constant") {
    const double v = n.at("value").number();
    base = [v](const TimeGrid&, std::size_t) { return constant_claim(v); };
  } else if (kind == "path_map") {
    const std::string map = n.at("map").str();
    if (map != "terminal" && map != "running_sup" && map != "time_average" && map != "abs_terminal")
      n.at("map").fail("unknown path map '" + map + "' (terminal, running_sup, time_average, abs_terminal)");
    base = [map, dim](const TimeGrid& grid, std::size_t d) {
      PathMap phi = map == "terminal"       ? terminal_value_map(dim)
                    : map == "running_sup"  ? running_sup_map(dim)
                    : map == "time_average" ? time_average_map(grid.horizon(), dim)
                                            : abs_terminal_map(dim);
      return discretize_path_functional(phi, grid, d);
    };
  } else if (kind == "log_contract") {
    const double s0 = opt_number(n, "s0", 1.0);
    const double drift = opt_number(n, "drift", 0.0);
    const double sigma = opt_number(n, "sigma", 1.0);
    if (!(std::abs(sigma) <= 1.0)) n.at("sigma").fail("volatility must lie in [-1, 1]");
    if (!(s0 > 0.0)) n.at("s0").fail("S0 must be positive");
    base = [s0, drift, sigma, dim](const TimeGrid& grid, std::size_t d) {
      return log_contract(
          s0, [drift](double) { return drift; },
          [sigma, dim, d](double) {
            std::vector<double> v(d, 0.0);
            v.at(dim) = sigma;
            return v;
          },
          grid, d);
    };
  } else if (kind == "ref") {
    const std::string of = n.at("of").str();
    auto it = known.find(of);
    if (it == known.end()) n.at("of").fail("unknown claim '" + of + "' (declare it earlier)");
    base = it->second;
  } else {
    n.at("kind").fail("unknown claim kind '" + kind +
                      "' (terminal, grid_max, abs_terminal, constant, path_map, log_contract, ref)");
  }
  const bool negate = n.has("negate") && n.at("negate").boolean();
  const std::optional<double> scale = n.has("scale") ? std::optional(n.at("scale").number_in(0.0, 1e6)) : std::nullopt;
  const std::optional<double> shift = n.has("shift") ? std::optional(n.at("shift").number()) : std::nullopt;
  const std::optional<double> pos = n.has("positive_part") ? std::optional(n.at("positive_part").number()) : std::nullopt;
  std::string id = n.has("id") ? n.at("id").str() : kind;
  return [base, negate, scale, shift, pos, id](const TimeGrid& grid, std::size_t d) {
    PathFunctional x = base(grid, d);
    if (scale) x = scaled(x, *scale);
    if (negate) x = negated(x);
    if (shift) x = shifted(x, *shift);
    if (pos) x = positive_part(x, *pos);
    x.name = id;
    return x;
  };
}

// ---------------------------------------------------------------------------------------------
// Suites

const std::vector<SuiteInfo> kCatalog = {
    {"profile",
     "concentration bound E(lambda X) <= lambda E[X] + l(lambda) on liquidity risk profiles (quadratic-growth, "
     "kappa-dominated and superquadratic generators)",
     {"generator", "claim", "bound", "lambdas"}},
    {"dual",
     "dual representation: Girsanov entropy identity, entropy-penalty bound and weak duality on random tilts",
     {"generator", "claim", "tilts"}},
    {"transport",
     "Talagrand T1 on quantized Gaussians, Kantorovich-Rubinstein duality and the transport-type inequality "
     "l*(W1) <= alpha",
     {"t1", "kr", "inequality"}},
    {"deviation", "Gaussian deviation bound P(X > m_X + r) <= exp(-l*(r - (l*)^-1(log 2)))", {"claim", "bound", "r"}},
    {"dimfree", "dimension-free bound for averages of i.i.d. claims", {"generator", "claim", "bound", "n", "lambda"}},
    {"pde", "semilinear PDE characterization: v(s, x) <= 0 by explicit finite differences",
     {"generator", "bound", "f", "s", "x", "lambdas"}},
    {"axioms", "cash additivity, normalization, monotonicity, convexity and time consistency",
     {"generator", "claims", "pairs"}},
    {"discretization", "L^2 rate of the piecewise-linear discretization of path-Lipschitz claims",
     {"map", "levels", "reference_levels", "samples"}},
};

const std::map<std::string, std::vector<const char*>>& entry_keys() {
  static const std::map<std::string, std::vector<const char*>> keys = {
      {"profile", {"generator", "claim", "bound", "lambdas", "levels", "samples"}},
      {"dual", {"generator", "claim", "tilts", "levels", "samples", "dimension", "search"}},
      {"transport", {"t1", "kr", "inequality"}},
      {"deviation", {"claim", "generator", "bound", "r", "levels", "samples"}},
      {"dimfree", {"generator", "claim", "bound", "n", "lambda", "block_dim", "levels", "samples"}},
      {"pde", {"generator", "bound", "f", "s", "x", "lambdas", "dx", "cfl", "width", "monte_carlo"}},
      {"axioms", {"generator", "claims", "pairs", "levels", "samples"}},
      {"discretization", {"map", "levels", "reference_levels", "samples", "p"}},
  };
  return keys;
}

struct BatchKey {
  double horizon;
  unsigned levels;
  std::size_t dimension;
  std::size_t samples;
  std::uint64_t seed;
  auto operator<=>(const BatchKey&) const = default;
};

// Batches are shared between entries of a run; only the most recent two are retained.
class BatchCache {
 public:
  std::shared_ptr<const BrownianBatch> get(const BatchKey& key) {
    {
      std::lock_guard lock(mutex_);
      for (auto& e : entries_)
        if (e.first == key) return e.second;
    }
    auto batch = std::make_shared<const BrownianBatch>(
        simulate(TimeGrid(key.horizon, key.levels), key.dimension, key.samples, key.seed));
    std::lock_guard lock(mutex_);
    entries_.emplace_back(key, batch);
    if (entries_.size() > 2) entries_.erase(entries_.begin());
    return batch;
  }

 private:
  std::mutex mutex_;
  std::vector<std::pair<BatchKey, std::shared_ptr<const BrownianBatch>>> entries_;
};

struct Context {
  const ExperimentConfig& config;
  std::string origin;
  BatchCache batches;
  std::mutex bias_mutex;
  std::map<BatchKey, double> bias;

  Node entry(const Json& j, const std::string& suite, std::size_t i) const {
    return Node(j, "$." + suite + "[" + std::to_string(i) + "]", &origin);
  }

  BatchKey key(const Node& n, std::size_t dimension, std::uint64_t salt = 0) const {
    return {config.horizon,
            static_cast<unsigned>(opt_integer(n, "levels", config.levels, 0, TimeGrid::kMaxLevels)),
            dimension,
            static_cast<std::size_t>(opt_integer(n, "samples", config.samples, 1, std::uint64_t{1} << 32)),
            salt ? mix64(config.seed ^ salt) : config.seed};
  }

  const GeneratorSpec& generator(const Node& n) const {
    const std::string id = n.str();
    auto it = config.generators.find(id);
    if (it == config.generators.end()) n.fail("unknown generator '" + id + "'");
    return it->second;
  }

  PathFunctional claim(const Node& n, const TimeGrid& grid, std::size_t d) const {
    const std::string id = n.str();
    auto it = config.claims.find(id);
    if (it == config.claims.end()) n.fail("unknown claim '" + id + "'");
    try {
      return it->second(grid, d);
    } catch (const std::exception& e) {
      n.fail(e.what());
    }
  }

  BoundFunction bound(const Node& n, const GeneratorSpec& g) const {
    try {
      return bound_function(parse_bound_source(n.str()), g, config.horizon);
    } catch (const std::exception& e) {
      n.fail(e.what());
    }
  }

  double bias_for(const BatchKey& key, const BrownianBatch& batch) {
    if (config.bias_constant) return *config.bias_constant;
    {
      std::lock_guard lock(bias_mutex);
      auto it = bias.find(key);
      if (it != bias.end()) return it->second;
    }
    const double c = calibrate_bias(batch, {terminal_claim(), abs_terminal_claim(), running_max_claim()}, {1.0, 2.0},
                                    config.solver);
    std::lock_guard lock(bias_mutex);
    bias[key] = c;
    return c;
  }
};

std::string fmt(double v) { return format_number(v); }
std::string vstr(Verdict v) { return std::string(to_string(v)); }
Verdict pass_or_violation(bool pass) { return pass ? Verdict::Pass : Verdict::Violation; }
// Two-sided agreement: within 3 sigma passes, beyond 5 sigma violates.
Verdict agreement(double diff, double err) { return classify(-std::abs(diff), err); }

SuiteOutcome run_profile(Context& ctx, const Json& entries) {
  SuiteOutcome out;
  CsvTable csv({"entry", "generator", "claim", "class", "bound_source", "lambda", "value", "stderr", "bound", "margin",
                "margin_stderr", "bias", "scheme", "verdict"});
  Json reports = Json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Node n = ctx.entry(entries[i], "profile", i);
    const auto& g = ctx.generator(n.at("generator"));
    const auto key = ctx.key(n, ctx.config.dimension);
    const TimeGrid grid(key.horizon, key.levels);
    const auto x = ctx.claim(n.at("claim"), grid, key.dimension);
    const auto l = ctx.bound(n.at("bound"), g);
    const auto lambdas = n.at("lambdas").numbers();
    auto batch = ctx.batches.get(key);
    RiskMeasureHandle handle(g, ctx.config.solver);
    ProfileOptions opts;
    const bool regression = g.kind != GeneratorKind::Entropic && !handle.cole_hopf_applies(x);
    opts.bias_constant = regression ? ctx.bias_for(key, *batch) : 0.0;
    if (ctx.config.confirm) opts.confirm_seed = mix64(key.seed ^ 0xC0FFEEULL);
    const auto p = profile(handle, x, lambdas, *batch, l, opts);
    for (const auto& q : p.points) {
      out.counts.add(q.verdict);
      csv.add({std::to_string(i), n.at("generator").str(), p.claim, to_string(p.class_tag), to_string(l.source),
               fmt(q.lambda), fmt(q.value.value), fmt(q.value.error), fmt(q.bound), fmt(q.margin), fmt(q.error),
               fmt(q.bias), q.scheme, vstr(q.verdict)});
    }
    // The frozen cap of a superquadratic generator is not convex in z, so neither is the profile
    // once lambda pushes |Z| past the cap; the chord test is reported but not scored there.
    const bool convexity_scored = g.kind != GeneratorKind::Superquadratic;
    if (convexity_scored) out.counts.add(pass_or_violation(p.convex));
    out.counts.add(pass_or_violation(p.dual_floor));
    Json j = to_json(p);
    j["entry"] = i;
    j["bias_constant"] = opts.bias_constant;
    j["convexity_scored"] = convexity_scored;
    reports.push_back(std::move(j));
  }
  out.report = reports;
  out.csv = csv.str();
  return out;
}

std::vector<TiltSpec> parse_tilts(const Node& n, const TimeGrid& grid, std::size_t d, std::uint64_t seed) {
  n.expect_keys({"count", "pieces", "q_max", "beta_max", "seed", "constant_q"});
  std::vector<TiltSpec> specs;
  if (auto cq = n.find("constant_q")) {
    for (double q : cq->numbers()) specs.push_back(TiltSpec::constant(grid, std::vector<double>(d, q)));
  }
  const std::size_t count = opt_integer(n, "count", 0, 0, 10000);
  const std::size_t pieces = opt_integer(n, "pieces", 1, 1, grid.cells());
  const double q_max = opt_number(n, "q_max", 1.0);
  const double beta_max = opt_number(n, "beta_max", 0.0);
  const std::uint64_t tseed = opt_integer(n, "seed", seed);
  for (std::size_t k = 0; k < count; ++k) specs.push_back(random_tilt(grid, d, pieces, q_max, beta_max, mix64(tseed + k)));
  if (specs.empty()) n.fail("no tilts: set count or constant_q");
  return specs;
}

SuiteOutcome run_dual(Context& ctx, const Json& entries) {
  SuiteOutcome out;
  CsvTable csv({"entry", "tilt", "check", "lhs", "rhs", "margin", "stderr", "verdict"});
  Json reports = Json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Node n = ctx.entry(entries[i], "dual", i);
    const auto& g = ctx.generator(n.at("generator"));
    const std::size_t d = opt_integer(n, "dimension", ctx.config.dimension, 1, 64);
    const auto key = ctx.key(n, d);
    const TimeGrid grid(key.horizon, key.levels);
    const auto x = ctx.claim(n.at("claim"), grid, d);
    const auto specs = parse_tilts(n.at("tilts"), grid, d, ctx.config.seed);
    auto batch = ctx.batches.get(key);
    RiskMeasureHandle handle(g, ctx.config.solver);
    Json tilts = Json::array();
    for (std::size_t k = 0; k < specs.size(); ++k) {
      const auto ts = tilt(*batch, specs[k]);
      const auto h = relative_entropy(ts);
      const double diff = h.plug_in.value - h.closed_form;
      const Verdict hv = agreement(diff, h.plug_in.error);
      out.counts.add(hv);
      csv.add({std::to_string(i), specs[k].summary(), "entropy_identity", fmt(h.plug_in.value), fmt(h.closed_form),
               fmt(-std::abs(diff)), fmt(h.plug_in.error), vstr(hv)});
      Json tj{{"tilt", specs[k].summary()},
              {"entropy_plug_in", to_json(h.plug_in)},
              {"entropy_closed_form", h.closed_form},
              {"entropy_verdict", vstr(hv)}};
      if (g.kind == GeneratorKind::Quadratic && g.c > 0.0) {
        const auto pc = entropy_penalty_check(g, specs[k], *batch);
        const Verdict pv = classify(pc.margin, pc.error);
        out.counts.add(pv);
        csv.add({std::to_string(i), specs[k].summary(), "entropy_penalty", fmt(pc.lhs), fmt(pc.rhs), fmt(pc.margin),
                 fmt(pc.error), vstr(pv)});
        tj["entropy_penalty"] = to_json(pc);
      }
      tilts.push_back(std::move(tj));
    }
    const bool regression = g.kind != GeneratorKind::Entropic && !handle.cole_hopf_applies(x);
    const double bias = regression ? ctx.bias_for(key, *batch) * std::pow(2.0, -0.5 * key.levels) : 0.0;
    const auto gap = dual_gap(handle, x, specs, *batch, bias);
    for (const auto& e : gap.entries) {
      const double margin = e.gap;
      const double err = combine_errors(gap.primal.error, e.error) + bias;
      const Verdict v = std::isfinite(e.dual) ? classify(margin, err) : Verdict::Pass;
      out.counts.add(v);
      csv.add({std::to_string(i), e.tilt, "weak_duality", fmt(e.dual), fmt(gap.primal.value), fmt(margin), fmt(err),
               vstr(v)});
    }
    Json j{{"entry", i}, {"generator", g.describe()}, {"claim", x.name}, {"tilts", tilts}, {"weak_duality", to_json(gap)}};
    if (n.has("search") && n.at("search").boolean()) {
      const auto s = dual_search(g, x, *batch);
      j["search"] = Json{{"best", s.best.summary()}, {"value", to_json(s.value)}, {"evaluations", s.evaluations}};
    }
    reports.push_back(std::move(j));
  }
  out.report = reports;
  out.csv = csv.str();
  return out;
}

SuiteOutcome run_transport(Context& ctx, const Json& entries) {
  SuiteOutcome out;
  CsvTable csv({"entry", "check", "case", "lhs", "rhs", "margin", "verdict"});
  Json reports = Json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Node n = ctx.entry(entries[i], "transport", i);
    n.expect_keys({"t1", "kr", "inequality"});
    Json j{{"entry", i}};
    const std::string id = std::to_string(i);
    if (auto t1 = n.find("t1")) {
      t1->expect_keys({"quantization", "perturbations", "seed", "mean_max", "sd_min", "sd_max"});
      const std::size_t nq = opt_integer(*t1, "quantization", 512, 2, 4096);
      const std::size_t count = opt_integer(*t1, "perturbations", 50, 0, 10000);
      const double mean_max = opt_number(*t1, "mean_max", 1.0);
      const double sd_min = opt_number(*t1, "sd_min", 0.6);
      const double sd_max = opt_number(*t1, "sd_max", 1.6);
      std::mt19937_64 rng(opt_integer(*t1, "seed", ctx.config.seed));
      std::uniform_real_distribution<double> um(-mean_max, mean_max), us(sd_min, sd_max);
      const auto ref = gaussian_quantization(nq);
      const double budget = quantization_budget(nq);
      Json rows = Json::array();
      for (std::size_t k = 0; k <= count; ++k) {
        // Case 0 is the pure mean shift, where T1 holds with equality.
        const double m = k == 0 ? 0.5 : um(rng);
        const double s = k == 0 ? 1.0 : us(rng);
        const auto mu = perturbed_gaussian(nq, {m}, {s});
        const auto r = check_t1(mu, ref, budget);
        const Verdict v = pass_or_violation(r.pass);
        out.counts.add(v);
        std::ostringstream cs;
        cs << "N(" << fmt(m) << "," << fmt(s) << "^2)";
        csv.add({id, "t1", cs.str(), fmt(r.h_w1), fmt(r.kl + r.budget), fmt(r.margin), vstr(v)});
        Json rj = to_json(r);
        rj["mean"] = m;
        rj["sd"] = s;
        rj["w1_exact"] = gaussian_w1(m, s);
        rj["kl_exact"] = gaussian_kl(m, s);
        rows.push_back(std::move(rj));
      }
      j["t1"] = Json{{"quantization", nq}, {"budget", budget}, {"cases", rows}};
    }
    if (auto kr = n.find("kr")) {
      kr->expect_keys({"pairs", "seed", "max_atoms", "tolerance"});
      const std::size_t pairs = opt_integer(*kr, "pairs", 20, 1, 10000);
      const std::size_t max_atoms = opt_integer(*kr, "max_atoms", 5, 2, 12);
      const double tol = opt_number(*kr, "tolerance", 1e-6);
      std::mt19937_64 rng(opt_integer(*kr, "seed", ctx.config.seed));
      std::uniform_int_distribution<std::size_t> atoms(2, max_atoms);
      std::uniform_real_distribution<double> pos(-3.0, 3.0), wt(0.05, 1.0);
      auto draw = [&] {
        const std::size_t k = atoms(rng);
        std::vector<double> pts(k), w(k);
        double total = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
          pts[a] = pos(rng);
          w[a] = wt(rng);
          total += w[a];
        }
        for (double& v : w) v /= total;
        return DiscreteMeasure(1, pts, w);
      };
      Json rows = Json::array();
      for (std::size_t k = 0; k < pairs; ++k) {
        const auto mu = draw();
        const auto nu = draw();
        std::vector<double> support(mu.points().begin(), mu.points().end());
        support.insert(support.end(), nu.points().begin(), nu.points().end());
        const auto cones = kantorovich_rubinstein_gap(mu, nu, cone_family(support));
        const auto slopes = kantorovich_rubinstein_gap(mu, nu, slope_sign_family(support));
        const bool ok = cones.lower_bound_holds && slopes.lower_bound_holds && std::abs(slopes.gap) <= tol;
        const Verdict v = pass_or_violation(ok);
        out.counts.add(v);
        csv.add({id, "kantorovich_rubinstein", "pair " + std::to_string(k), fmt(slopes.family_sup), fmt(slopes.w1),
                 fmt(-std::abs(slopes.gap)), vstr(v)});
        rows.push_back(Json{{"cones", to_json(cones)}, {"slope_signs", to_json(slopes)}, {"pass", ok}});
      }
      j["kr"] = Json{{"tolerance", tol}, {"pairs", rows}};
    }
    if (auto ineq = n.find("inequality")) {
      ineq->expect_keys({"generator", "bound", "family", "tilts", "levels", "samples", "dimension"});
      const auto& g = ctx.generator(ineq->at("generator"));
      const auto l = ctx.bound(ineq->at("bound"), g);
      const std::size_t d = opt_integer(*ineq, "dimension", ctx.config.dimension, 1, 64);
      const auto key = ctx.key(*ineq, d);
      const TimeGrid grid(key.horizon, key.levels);
      std::vector<PathFunctional> family;
      for (const auto& c : ineq->at("family").items()) family.push_back(ctx.claim(c, grid, d));
      const auto specs = parse_tilts(ineq->at("tilts"), grid, d, ctx.config.seed);
      auto batch = ctx.batches.get(key);
      TransportReport r;
      try {
        r = transport_inequality_check(g, l, specs, family, *batch);
      } catch (const std::invalid_argument& e) {
        ineq->fail(e.what());
      }
      for (const auto& e : r.entries) {
        const Verdict v = std::isfinite(e.alpha) ? classify(e.margin, e.error) : Verdict::Pass;
        out.counts.add(v);
        csv.add({id, "transport_inequality", e.tilt, fmt(e.lstar), fmt(e.alpha), fmt(e.margin), vstr(v)});
      }
      j["inequality"] = to_json(r);
    }
    reports.push_back(std::move(j));
  }
  out.report = reports;
  out.csv = csv.str();
  return out;
}

SuiteOutcome run_deviation(Context& ctx, const Json& entries) {
  SuiteOutcome out;
  CsvTable csv({"entry", "claim", "r", "tail", "tail_lower", "tail_upper", "bound", "verdict"});
  Json reports = Json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Node n = ctx.entry(entries[i], "deviation", i);
    const auto key = ctx.key(n, ctx.config.dimension);
    const TimeGrid grid(key.horizon, key.levels);
    const auto x = ctx.claim(n.at("claim"), grid, key.dimension);
    const GeneratorSpec g = n.has("generator") ? ctx.generator(n.at("generator")) : entropic();
    const auto l = ctx.bound(n.at("bound"), g);
    auto batch = ctx.batches.get(key);
    DeviationReport r;
    try {
      r = deviation_check(*batch, x, l, n.at("r").numbers());
    } catch (const std::invalid_argument& e) {
      n.fail(e.what());
    }
    for (const auto& row : r.rows) {
      out.counts.add(row.verdict);
      csv.add({std::to_string(i), r.claim, fmt(row.r), fmt(row.tail), fmt(row.ci.lower), fmt(row.ci.upper),
               fmt(row.bound), vstr(row.verdict)});
    }
    Json j = to_json(r);
    j["entry"] = i;
    reports.push_back(std::move(j));
  }
  out.report = reports;
  out.csv = csv.str();
  return out;
}

SuiteOutcome run_dimfree(Context& ctx, const Json& entries) {
  SuiteOutcome out;
  CsvTable csv({"entry", "claim", "lambda", "n", "value", "stderr", "bound", "margin", "verdict"});
  Json reports = Json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Node n = ctx.entry(entries[i], "dimfree", i);
    const auto& g = ctx.generator(n.at("generator"));
    std::vector<std::size_t> ns;
    for (const auto& v : n.at("n").items()) ns.push_back(v.integer(1, 256));
    if (ns.empty()) n.at("n").fail("empty list");
    const std::size_t block = opt_integer(n, "block_dim", 1, 1, 16);
    const std::size_t d = *std::max_element(ns.begin(), ns.end()) * block;
    const auto key = ctx.key(n, d);
    const TimeGrid grid(key.horizon, key.levels);
    const auto x = ctx.claim(n.at("claim"), grid, block);
    const auto l = ctx.bound(n.at("bound"), g);
    const double lambda = n.at("lambda").number_in(0.0, 1e3);
    auto batch = ctx.batches.get(key);
    RiskMeasureHandle handle(g, ctx.config.solver);
    const bool regression = g.kind != GeneratorKind::Entropic && !handle.cole_hopf_applies(x);
    const double bias = regression ? ctx.bias_for(key, *batch) : 0.0;
    const auto r = dimension_free_check(handle, x, ns, lambda, l, *batch, block, bias);
    for (const auto& row : r.rows) {
      out.counts.add(row.verdict);
      csv.add({std::to_string(i), r.claim, fmt(lambda), std::to_string(row.n), fmt(row.value.value),
               fmt(row.value.error), fmt(row.bound), fmt(row.margin), vstr(row.verdict)});
    }
    out.counts.add(pass_or_violation(r.bound_constant));
    Json j = to_json(r);
    j["entry"] = i;
    reports.push_back(std::move(j));
  }
  out.report = reports;
  out.csv = csv.str();
  return out;
}

std::function<double(double)> terminal_map(const Node& n) {
  const std::string f = n.str();
  if (f == "identity") return [](double y) { return y; };
  if (f == "abs") return [](double y) { return std::abs(y); };
  if (f == "positive_part") return [](double y) { return std::max(y, 0.0); };
  if (f == "sin") return [](double y) { return std::sin(y); };
  if (f == "clipped") return [](double y) { return std::clamp(y, -1.0, 1.0); };
  n.fail("unknown terminal map '" + f + "' (identity, abs, positive_part, sin, clipped)");
}

SuiteOutcome run_pde(Context& ctx, const Json& entries) {
  SuiteOutcome out;
  CsvTable csv({"entry", "generator", "lambda", "value", "budget", "reference", "monte_carlo", "mc_stderr", "verdict"});
  Json reports = Json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Node n = ctx.entry(entries[i], "pde", i);
    const auto& g = ctx.generator(n.at("generator"));
    const auto l = ctx.bound(n.at("bound"), g);
    const auto f = terminal_map(n.at("f"));
    const double s = n.at("s").number();
    const double x = n.at("x").number();
    PdeOptions opts;
    opts.dx = opt_number(n, "dx", opts.dx);
    opts.cfl = opt_number(n, "cfl", opts.cfl);
    opts.width = opt_number(n, "width", opts.width);
    if (!(opts.cfl > 0.0 && opts.cfl <= 0.5)) n.at("cfl").fail("explicit scheme needs cfl in (0, 1/2]");
    if (!(s >= 0.0 && s < ctx.config.horizon)) n.at("s").fail("need 0 <= s < T");
    std::shared_ptr<const BrownianBatch> batch;
    if (auto mc = n.find("monte_carlo")) {
      mc->expect_keys({"levels", "samples"});
      const BatchKey key{ctx.config.horizon - s,
                         static_cast<unsigned>(opt_integer(*mc, "levels", 6, 0, TimeGrid::kMaxLevels)), 1,
                         static_cast<std::size_t>(opt_integer(*mc, "samples", ctx.config.samples, 1)),
                         mix64(ctx.config.seed ^ 0x9DEULL)};
      batch = ctx.batches.get(key);
    }
    PdeReport r;
    try {
      r = pde_check(g, l, f, ctx.config.horizon, s, x, n.at("lambdas").numbers(), opts, batch.get());
    } catch (const std::exception& e) {
      n.fail(e.what());
    }
    for (const auto& row : r.rows) {
      const Verdict v = pass_or_violation(row.pass);
      out.counts.add(v);
      csv.add({std::to_string(i), r.generator, fmt(row.lambda), fmt(row.value), fmt(row.budget), fmt(row.reference),
               row.monte_carlo ? fmt(row.monte_carlo->value) : "", row.monte_carlo ? fmt(row.monte_carlo->error) : "",
               vstr(v)});
    }
    Json j = to_json(r);
    j["entry"] = i;
    j["f"] = n.at("f").str();
    reports.push_back(std::move(j));
  }
  out.report = reports;
  out.csv = csv.str();
  return out;
}

SuiteOutcome run_axioms(Context& ctx, const Json& entries) {
  SuiteOutcome out;
  CsvTable csv({"entry", "generator", "check", "margin", "stderr", "verdict"});
  Json reports = Json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Node n = ctx.entry(entries[i], "axioms", i);
    const auto& g = ctx.generator(n.at("generator"));
    const auto key = ctx.key(n, ctx.config.dimension);
    const TimeGrid grid(key.horizon, key.levels);
    std::vector<PathFunctional> claims;
    for (const auto& c : n.at("claims").items()) claims.push_back(ctx.claim(c, grid, key.dimension));
    if (claims.empty()) n.at("claims").fail("need at least one claim");
    const std::size_t pairs = opt_integer(n, "pairs", 20, 1, 10000);
    auto batch = ctx.batches.get(key);
    RiskMeasureHandle handle(g, ctx.config.solver);
    // Random pairs combine up to two claims, so the regression bias budget is sized for twice
    // the largest Lipschitz constant.
    double size = 0.0;
    for (const auto& c : claims) size = std::max(size, c.lipschitz_constant);
    const double bias = g.kind == GeneratorKind::Entropic
                            ? 0.0
                            : ctx.bias_for(key, *batch) * 2.0 * size * std::pow(2.0, -0.5 * key.levels);
    const auto r = axiom_suite(handle, claims, *batch, pairs, mix64(ctx.config.seed ^ 0xA1ULL), bias);
    for (const auto& c : r.checks) {
      const Verdict v = c.pass ? Verdict::Pass : classify(c.margin, c.error);
      out.counts.add(v);
      csv.add({std::to_string(i), r.generator, c.name, fmt(c.margin), fmt(c.error), vstr(v)});
    }
    Json j = to_json(r);
    j["entry"] = i;
    j["bias"] = bias;
    reports.push_back(std::move(j));
  }
  out.report = reports;
  out.csv = csv.str();
  return out;
}

SuiteOutcome run_discretization(Context& ctx, const Json& entries) {
  SuiteOutcome out;
  CsvTable csv({"entry", "map", "n", "moment", "stderr"});
  Json reports = Json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Node n = ctx.entry(entries[i], "discretization", i);
    const std::string map = n.at("map").str();
    PathMap phi;
    if (map == "running_sup") phi = running_sup_map();
    else if (map == "terminal") phi = terminal_value_map();
    else if (map == "time_average") phi = time_average_map(ctx.config.horizon);
    else if (map == "abs_terminal") phi = abs_terminal_map();
    else n.at("map").fail("unknown path map '" + map + "'");
    std::vector<unsigned> levels;
    for (const auto& v : n.at("levels").items()) levels.push_back(static_cast<unsigned>(v.integer(0, 18)));
    const unsigned fine = static_cast<unsigned>(n.at("reference_levels").integer(1, 18));
    const std::size_t samples = opt_integer(n, "samples", 4000, 2, 1'000'000);
    const double p = opt_number(n, "p", 2.0);
    DiscretizationStudy s;
    try {
      s = discretization_error(phi, levels, fine, samples, ctx.config.seed, p);
    } catch (const std::invalid_argument& e) {
      n.fail(e.what());
    }
    for (std::size_t k = 0; k < s.levels.size(); ++k)
      csv.add({std::to_string(i), map, std::to_string(s.levels[k]), fmt(s.moments[k].value), fmt(s.moments[k].error)});
    // The envelope (2^n)^{1 - p/2} has slope 1 - p/2 < 0; a nonnegative slope contradicts convergence.
    out.counts.add(s.slope < 0.0 || map == "terminal" ? Verdict::Pass : Verdict::Violation);
    Json j = to_json(s);
    j["entry"] = i;
    j["map"] = map;
    reports.push_back(std::move(j));
  }
  out.report = reports;
  out.csv = csv.str();
  return out;
}

using SuiteRunner = SuiteOutcome (*)(Context&, const Json&);

SuiteRunner runner(const std::string& suite) {
  static const std::map<std::string, SuiteRunner> table = {
      {"profile", run_profile}, {"dual", run_dual},     {"transport", run_transport},
      {"deviation", run_deviation}, {"dimfree", run_dimfree}, {"pde", run_pde},
      {"axioms", run_axioms},   {"discretization", run_discretization}};
  auto it = table.find(suite);
  if (it == table.end()) throw std::invalid_argument("unknown suite " + suite);
  return it->second;
}

SuiteOutcome run_in(Context& ctx, const std::string& suite) {
  SuiteOutcome out;
  try {
    out = runner(suite)(ctx, ctx.config.sections.at(suite));
  } catch (const std::exception& e) {
    out = SuiteOutcome{};
    out.error = e.what();
  }
  out.suite = suite;
  return out;
}

// Structural validation that needs no simulation: cross references, numerics and claim routing.
void validate_sections(ExperimentConfig& cfg) {
  Context ctx{cfg, cfg.origin, {}, {}, {}};
  const TimeGrid grid(cfg.horizon, cfg.levels);
  for (const auto& [suite, entries] : cfg.sections) {
    const auto& keys = entry_keys().at(suite);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      Node n = ctx.entry(entries[i], suite, i);
      if (!n.is_object()) n.fail("expected an object");
      for (auto it = entries[i].begin(); it != entries[i].end(); ++it)
        if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }) == keys.end())
          n.fail("unknown field '" + it.key() + "'");
      if (suite == "profile") {
        const auto& g = ctx.generator(n.at("generator"));
        const auto l = ctx.bound(n.at("bound"), g);
        const auto x = ctx.claim(n.at("claim"), grid, cfg.dimension);
        try {
          validate_route(l.source, g, x);
        } catch (const std::invalid_argument& e) {
          n.fail(e.what());
        }
        const auto lambdas = n.at("lambdas").numbers();
        if (lambdas.empty() || lambdas.front() != 0.0) n.at("lambdas").fail("the lambda grid must start at \"0\"");
        for (std::size_t k = 1; k < lambdas.size(); ++k)
          if (!(lambdas[k] > lambdas[k - 1])) n.at("lambdas").fail("the lambda grid must be increasing");
      } else if (suite == "dual" || suite == "axioms" || suite == "dimfree") {
        ctx.generator(n.at("generator"));
        if (suite == "axioms") {
          for (const auto& c : n.at("claims").items()) ctx.claim(c, grid, cfg.dimension);
        } else {
          ctx.claim(n.at("claim"), grid, cfg.dimension);
        }
        if (suite == "dimfree") {
          const auto& g = ctx.generator(n.at("generator"));
          const auto l = ctx.bound(n.at("bound"), g);
          try {
            validate_route(l.source, g, ctx.claim(n.at("claim"), grid, 1));
          } catch (const std::invalid_argument& e) {
            n.fail(e.what());
          }
        }
      } else if (suite == "deviation") {
        ctx.claim(n.at("claim"), grid, cfg.dimension);
        const GeneratorSpec g = n.has("generator") ? ctx.generator(n.at("generator")) : entropic();
        if (!(ctx.bound(n.at("bound"), g).quad_coef > 0.0)) n.at("bound").fail("needs a positive quadratic coefficient");
        for (double r : n.at("r").numbers())
          if (!(r > 0.0)) n.at("r").fail("r values must be positive");
      } else if (suite == "pde") {
        const auto& g = ctx.generator(n.at("generator"));
        ctx.bound(n.at("bound"), g);
        if (g.depends_on_y()) n.at("generator").fail("the PDE check needs a generator depending on z only");
        terminal_map(n.at("f"));
        if (n.has("cfl")) {
          const double cfl = n.at("cfl").number();
          if (!(cfl > 0.0 && cfl <= 0.5)) n.at("cfl").fail("CFL violation: explicit scheme needs dt <= dx^2 / 2");
        }
      } else if (suite == "transport") {
        if (auto ineq = n.find("inequality")) {
          const auto& g = ctx.generator(ineq->at("generator"));
          ctx.bound(ineq->at("bound"), g);
          for (const auto& c : ineq->at("family").items()) ctx.claim(c, grid, cfg.dimension);
        }
      }
    }
  }
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

const std::vector<SuiteInfo>& suite_catalog() { return kCatalog; }

void VerdictCounts::add(Verdict v) {
  switch (v) {
    case Verdict::Pass: ++pass; break;
    case Verdict::Inconclusive: ++inconclusive; break;
    case Verdict::Violation: ++violation; break;
  }
}

void VerdictCounts::add(const VerdictCounts& o) {
  pass += o.pass;
  inconclusive += o.inconclusive;
  violation += o.violation;
}

Verdict VerdictCounts::worst() const {
  if (violation) return Verdict::Violation;
  if (inconclusive) return Verdict::Inconclusive;
  return Verdict::Pass;
}

ExperimentConfig parse_config(const Json& doc, const std::string& origin) {
  ExperimentConfig cfg;
  cfg.origin = origin;
  Node root(doc, "$", &cfg.origin);
  root.expect_keys({"name", "seed", "grid", "dimension", "samples", "generators", "claims", "suites", "output",
                    "tolerances", "solver", "profile", "dual", "transport", "deviation", "dimfree", "pde", "axioms",
                    "discretization"});
  cfg.name = root.at("name").str();
  cfg.seed = root.at("seed").integer();
  const Node grid = root.at("grid");
  grid.expect_keys({"T", "n"});
  cfg.horizon = grid.at("T").number_in(1e-6, 1e6);
  cfg.levels = static_cast<unsigned>(grid.at("n").integer(0, TimeGrid::kMaxLevels));
  cfg.dimension = opt_integer(root, "dimension", 1, 1, 1024);
  cfg.samples = root.at("samples").integer(1, std::uint64_t{1} << 32);
  cfg.output_dir = root.has("output") ? root.at("output").str() : "";

  if (auto gens = root.find("generators")) {
    for (const auto& g : gens->items()) {
      const std::string id = g.at("id").str();
      if (cfg.generators.count(id)) g.at("id").fail("duplicate generator id '" + id + "'");
      cfg.generators.emplace(id, parse_generator(g, cfg.generators));
    }
  }
  if (auto claims = root.find("claims")) {
    for (const auto& c : claims->items()) {
      const std::string id = c.at("id").str();
      if (cfg.claims.count(id)) c.at("id").fail("duplicate claim id '" + id + "'");
      cfg.claims.emplace(id, parse_claim(c, cfg.claims));
    }
  }
  if (auto tol = root.find("tolerances")) {
    tol->expect_keys({"bias_constant", "confirm"});
    if (auto b = tol->find("bias_constant")) {
      if (!(b->is_string() && b->str() == "auto")) cfg.bias_constant = b->number_in(0.0, 1e6);
    }
    if (auto c = tol->find("confirm")) cfg.confirm = c->boolean();
  }
  if (auto s = root.find("solver")) {
    s->expect_keys({"picard_iters", "basis", "spline_basis", "paths_per_function", "degree", "cole_hopf"});
    cfg.solver.picard_iters = static_cast<unsigned>(opt_integer(*s, "picard_iters", cfg.solver.picard_iters, 1, 50));
    if (auto b = s->find("basis")) {
      try {
        cfg.solver.regression.basis = parse_basis(b->str());
      } catch (const std::exception& e) {
        b->fail(e.what());
      }
    }
    cfg.solver.regression.spline_basis = opt_integer(*s, "spline_basis", cfg.solver.regression.spline_basis, 1, 4096);
    cfg.solver.regression.paths_per_function =
        opt_integer(*s, "paths_per_function", cfg.solver.regression.paths_per_function, 1, 100000);
    cfg.solver.regression.degree = static_cast<unsigned>(opt_integer(*s, "degree", cfg.solver.regression.degree, 0, 8));
    if (auto c = s->find("cole_hopf")) cfg.solver.cole_hopf = c->boolean();
  }

  std::set<std::string> selected;
  const Node suites = root.at("suites");
  bool all = false;
  for (const auto& s : suites.items()) {
    const std::string name = s.str();
    if (name == "all") {
      all = true;
      continue;
    }
    if (!entry_keys().count(name)) s.fail("unknown suite '" + name + "' (see list-suites)");
    if (!root.has(name)) s.fail("suite '" + name + "' selected but no '" + name + "' section is present");
    selected.insert(name);
  }
  for (const auto& info : kCatalog) {
    if ((all && root.has(info.name)) || selected.count(info.name)) {
      const Node sec = root.at(info.name);
      if (!sec.is_array()) sec.fail("expected an array of entries");
      cfg.suites.push_back(info.name);
      cfg.sections[info.name] = sec.raw();
    }
  }
  if (cfg.suites.empty()) suites.fail("no suite selected");
  validate_sections(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON (" +
                      e.what() + ")");
  }
  return parse_config(doc, path.string());
}

SuiteOutcome run_suite(const ExperimentConfig& config, const std::string& suite) {
  Context ctx{config, config.origin, {}, {}, {}};
  if (!config.sections.count(suite)) throw std::invalid_argument("suite " + suite + " is not selected in the config");
  return run_in(ctx, suite);
}

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  RunResult result;
  result.out_dir = options.out_dir ? *options.out_dir
                                   : std::filesystem::path(config.output_dir.empty() ? "out/" + config.name
                                                                                     : config.output_dir);
  Context ctx{config, config.origin, {}, {}, {}};
  const auto started = utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<SuiteOutcome> outcomes(config.suites.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  auto worker = [&] {
    for (std::size_t k = next++; k < outcomes.size(); k = next++) {
      if (stop) {
        outcomes[k].suite = config.suites[k];
        outcomes[k].skipped = true;
        continue;
      }
      outcomes[k] = run_in(ctx, config.suites[k]);
      if (options.fail_fast && (!outcomes[k].error.empty() || outcomes[k].counts.violation)) stop = true;
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(1, outcomes.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  Json summary{{"format_version", kFormatVersion}, {"config", config.name}};
  Json suites = Json::object();
  bool failed = false;
  for (auto& o : outcomes) {
    Json s{{"verdict", o.error.empty() && !o.skipped ? vstr(o.counts.worst()) : (o.skipped ? "SKIPPED" : "ERROR")},
           {"pass", o.counts.pass},
           {"inconclusive", o.counts.inconclusive},
           {"violation", o.counts.violation}};
    if (!o.error.empty()) s["error"] = o.error;
    suites[o.suite] = std::move(s);
    result.counts.add(o.counts);
    failed = failed || !o.error.empty();
    if (o.error.empty() && !o.skipped) {
      Json report{{"format_version", kFormatVersion}, {"config", config.name}, {"suite", o.suite}, {"entries", o.report}};
      write_text(result.out_dir / (o.suite + ".json"), report.dump(2) + "\n");
      write_text(result.out_dir / (o.suite + ".csv"), o.csv);
    }
  }
  summary["suites"] = suites;
  summary["counts"] = Json{{"pass", result.counts.pass},
                           {"inconclusive", result.counts.inconclusive},
                           {"violation", result.counts.violation}};
  summary["verdict"] = vstr(result.counts.worst());
  write_text(result.out_dir / "summary.json", summary.dump(2) + "\n");

  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Json meta{{"started_utc", started},
            {"finished_utc", utc_timestamp()},
            {"elapsed_seconds", elapsed},
            {"config_path", config.origin},
            {"jobs", jobs},
            {"hardware_threads", std::thread::hardware_concurrency()}};
  write_text(result.out_dir / "metadata.json", meta.dump(2) + "\n");

  result.suites = std::move(outcomes);
  result.exit_code = result.counts.violation ? 1 : (failed ? 3 : 0);
  return result;
}

}  // namespace dynrisk
