#include "dynrisk/regression.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace dynrisk {

namespace {

void enumerate_exponents(std::size_t vars, unsigned degree, std::vector<unsigned>& current, std::size_t pos,
                         unsigned remaining, std::vector<std::vector<unsigned>>& out) {
  if (pos == vars) {
    out.push_back(current);
    return;
  }
  for (unsigned e = 0; e <= remaining; ++e) {
    current[pos] = e;
    enumerate_exponents(vars, degree, current, pos + 1, remaining - e, out);
  }
  current[pos] = 0;
}

std::vector<std::vector<unsigned>> monomials(std::size_t vars, unsigned degree) {
  std::vector<std::vector<unsigned>> out;
  std::vector<unsigned> current(vars, 0);
  enumerate_exponents(vars, degree, current, 0, degree, out);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    unsigned da = 0, db = 0;
    for (unsigned e : a) da += e;
    for (unsigned e : b) db += e;
    return da < db;
  });
  return out;
}

/// Hash of a strided sample of the data, so distinct batches that reuse an address differ.
std::uint64_t fingerprint(std::span<const double> data) {
  std::uint64_t h = 1469598103934665603ULL;
  const std::size_t stride = std::max<std::size_t>(1, data.size() / 257);
  for (std::size_t i = 0; i < data.size(); i += stride) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], sizeof bits);
    h = (h ^ bits) * 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<Feature> unique_features(const std::vector<Feature>& features) {
  std::vector<Feature> out;
  for (const auto& f : features)
    if (std::none_of(out.begin(), out.end(), [&](const Feature& g) { return g.key == f.key; })) out.push_back(f);
  return out;
}

std::string to_string(BasisKind b) { return b == BasisKind::LinearSpline ? "linear_spline" : "polynomial"; }

BasisKind parse_basis(const std::string& name) {
  if (name == "linear_spline") return BasisKind::LinearSpline;
  if (name == "polynomial") return BasisKind::Polynomial;
  throw std::invalid_argument("unknown regression basis '" + name + "'");
}

namespace {

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& gram, bool& reduced) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double cutoff = 1e-10 * std::max(ev.maxCoeff(), 1e-300);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > cutoff)
      inv(i) = 1.0 / ev(i);
    else
      reduced = true;
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

RegressionPlan::RegressionPlan(const BrownianBatch& batch, const std::vector<Feature>& features,
                               RegressionOptions options)
    : samples_(batch.samples()), nodes_(batch.grid().cells() + 1), options_(options) {
  const auto uniq = unique_features(features);
  for (const auto& f : uniq) keys_.push_back(f.key);
  const std::size_t nf = uniq.size();

  features_.assign(samples_ * nodes_ * nf, 0.0f);
  // Paths are processed in blocks so the node-major writes stay contiguous.
  constexpr std::size_t kBlock = 256;
  std::vector<double> traj(nodes_);
  std::vector<float> block(kBlock * nodes_ * nf);
  for (std::size_t first = 0; first < samples_; first += kBlock) {
    const std::size_t count = std::min(kBlock, samples_ - first);
    for (std::size_t b = 0; b < count; ++b) {
      const PathView p = batch.path(first + b);
      for (std::size_t f = 0; f < nf; ++f) {
        uniq[f].fill(p, traj);
        for (std::size_t k = 0; k < nodes_; ++k) block[(k * kBlock + b) * nf + f] = static_cast<float>(traj[k]);
      }
    }
    for (std::size_t k = 0; k < nodes_; ++k)
      std::copy_n(&block[k * kBlock * nf], count * nf, &features_[(k * samples_ + first) * nf]);
  }

  steps_.resize(nodes_);
  const double inv_m = 1.0 / static_cast<double>(samples_);
  for (std::size_t k = 0; k < nodes_; ++k) {
    Step& st = steps_[k];
    for (std::size_t f = 0; f < nf; ++f) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t m = 0; m < samples_; ++m) mean += feature(m, k, f);
      mean *= inv_m;
      for (std::size_t m = 0; m < samples_; ++m) {
        double d = feature(m, k, f) - mean;
        sq += d * d;
      }
      const double sd = std::sqrt(sq * inv_m);
      if (sd > 1e-6 * (1.0 + std::abs(mean))) {
        st.active.push_back(f);
        st.centre.push_back(mean);
        st.scale.push_back(1.0 / sd);
      }
    }
    if (options_.basis == BasisKind::LinearSpline)
      build_spline(k);
    else
      build_polynomial(k);
  }
}

std::size_t RegressionPlan::basis_size(std::size_t node) const {
  const Step& st = steps_.at(node);
  if (options_.basis == BasisKind::LinearSpline) return st.spline_size;
  return st.exponents.size();
}

void RegressionPlan::build_polynomial(std::size_t k) {
  Step& st = steps_[k];
  unsigned degree = options_.degree;
  st.exponents = monomials(st.active.size(), degree);
  while (st.exponents.size() > options_.max_basis && degree > 1) st.exponents = monomials(st.active.size(), --degree);
  const Eigen::MatrixXd a = design(k);
  const Eigen::MatrixXd gram = (a.transpose() * a) / static_cast<double>(samples_);
  st.gram_pinv = pseudo_inverse(gram, reduced_);
}

void RegressionPlan::build_spline(std::size_t k) {
  Step& st = steps_[k];
  const std::size_t na = st.active.size();
  const std::size_t budget =
      std::max<std::size_t>(1, std::min(options_.spline_basis, samples_ / std::max<std::size_t>(1, options_.paths_per_function)));
  std::size_t per_axis = 2;
  if (na > 0) {
    per_axis = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(budget), 1.0 / static_cast<double>(na)) + 1e-9));
    per_axis = std::clamp<std::size_t>(per_axis, 2, 64);
  }
  st.knots.assign(na, {});
  // Knots only need the marginal quantiles, so a strided subsample of the paths suffices.
  const std::size_t stride = std::max<std::size_t>(1, samples_ / 16384);
  std::vector<double> xs;
  for (std::size_t j = 0; j < na; ++j) {
    xs.clear();
    for (std::size_t m = 0; m < samples_; m += stride) xs.push_back((feature(m, k, st.active[j]) - st.centre[j]) * st.scale[j]);
    std::sort(xs.begin(), xs.end());
    // Interior knots at equally spaced probabilities; the end knots sit at the 0.1% and 99.9%
    // quantiles and the outermost pieces extrapolate linearly.
    std::vector<double> kn;
    for (std::size_t i = 0; i < per_axis; ++i) {
      const double p = 0.001 + 0.998 * static_cast<double>(i) / static_cast<double>(per_axis - 1);
      const double v = xs[static_cast<std::size_t>(p * static_cast<double>(xs.size() - 1))];
      if (kn.empty() || v > kn.back() + 1e-9) kn.push_back(v);
    }
    if (kn.size() < 2) kn = {xs.front(), xs.front() + 1.0};
    st.knots[j] = std::move(kn);
  }
  st.bucket.assign(na, {});
  st.bucket_scale.assign(na, 0.0);
  for (std::size_t j = 0; j < na; ++j) {
    const auto& kn = st.knots[j];
    const std::size_t nbk = 8 * kn.size();
    const double width = (kn.back() - kn.front()) / static_cast<double>(nbk);
    st.bucket_scale[j] = 1.0 / width;
    auto& table = st.bucket[j];
    table.resize(nbk);
    std::size_t i = 0;
    for (std::size_t b = 0; b < nbk; ++b) {
      const double left = kn.front() + static_cast<double>(b) * width;
      while (i + 2 < kn.size() && kn[i + 1] <= left) ++i;
      table[b] = static_cast<std::uint16_t>(i);
    }
  }
  st.stride.assign(na, 1);
  st.spline_size = 1;
  for (std::size_t j = na; j-- > 0;) {
    st.stride[j] = st.spline_size;
    st.spline_size *= st.knots[j].size();
  }
  const std::size_t nb = st.spline_size;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nb));
  std::vector<std::size_t> idx(std::size_t{1} << na);
  std::vector<double> wt(idx.size());
  for (std::size_t m = 0; m < samples_; ++m) {
    const std::size_t cnt = spline_values(m, k, idx.data(), wt.data());
    for (std::size_t a = 0; a < cnt; ++a)
      for (std::size_t b = 0; b < cnt; ++b)
        gram(static_cast<Eigen::Index>(idx[a]), static_cast<Eigen::Index>(idx[b])) += wt[a] * wt[b];
  }
  // Basis functions supported on empty regions (e.g. running max below the level) are dropped
  // by the pseudo-inverse; only flag a reduction when an occupied function is degenerate.
  bool reduced = false;
  Eigen::VectorXi used = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(nb));
  for (std::size_t i = 0; i < nb; ++i)
    used(static_cast<Eigen::Index>(i)) = gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) > 0.0;
  std::vector<Eigen::Index> live;
  for (Eigen::Index i = 0; i < used.size(); ++i)
    if (used(i)) live.push_back(i);
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(live.size()), static_cast<Eigen::Index>(live.size()));
  for (std::size_t a = 0; a < live.size(); ++a)
    for (std::size_t b = 0; b < live.size(); ++b) sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = gram(live[a], live[b]);
  const Eigen::MatrixXd sub_pinv = pseudo_inverse(sub, reduced);
  st.gram_pinv = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nb));
  for (std::size_t a = 0; a < live.size(); ++a)
    for (std::size_t b = 0; b < live.size(); ++b) st.gram_pinv(live[a], live[b]) = sub_pinv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  reduced_ = reduced_ || reduced;
}

std::size_t RegressionPlan::spline_values(std::size_t m, std::size_t k, std::size_t* index, double* weight) const {
  const Step& st = steps_[k];
  const std::size_t na = st.active.size();
  std::size_t lo[8];
  double t[8];
  for (std::size_t j = 0; j < na; ++j) {
    const auto& kn = st.knots[j];
    const double x = (feature(m, k, st.active[j]) - st.centre[j]) * st.scale[j];
    const double u = (x - kn.front()) * st.bucket_scale[j];
    std::size_t i = 0;
    if (u >= static_cast<double>(st.bucket[j].size()))
      i = kn.size() - 2;
    else if (u > 0.0)
      i = st.bucket[j][static_cast<std::size_t>(u)];
    while (i + 2 < kn.size() && x >= kn[i + 1]) ++i;
    lo[j] = i;
    t[j] = (x - kn[i]) / (kn[i + 1] - kn[i]);
  }
  const std::size_t cnt = std::size_t{1} << na;
  for (std::size_t corner = 0; corner < cnt; ++corner) {
    std::size_t id = 0;
    double w = 1.0;
    for (std::size_t j = 0; j < na; ++j) {
      const bool up = (corner >> j) & 1u;
      id += (lo[j] + (up ? 1 : 0)) * st.stride[j];
      w *= up ? t[j] : 1.0 - t[j];
    }
    index[corner] = id;
    weight[corner] = w;
  }
  return cnt;
}

Eigen::MatrixXd RegressionPlan::design(std::size_t node) const {
  const Step& st = steps_.at(node);
  const std::size_t na = st.active.size();
  const std::size_t nb = st.exponents.size();
  Eigen::MatrixXd a(samples_, nb);
  std::vector<double> x(na);
  std::vector<double> pw;
  unsigned maxdeg = 0;
  for (const auto& e : st.exponents)
    for (unsigned v : e) maxdeg = std::max(maxdeg, v);
  pw.resize(na * (maxdeg + 1));
  for (std::size_t m = 0; m < samples_; ++m) {
    for (std::size_t j = 0; j < na; ++j) {
      x[j] = (feature(m, node, st.active[j]) - st.centre[j]) * st.scale[j];
      pw[j * (maxdeg + 1)] = 1.0;
      for (unsigned e = 1; e <= maxdeg; ++e) pw[j * (maxdeg + 1) + e] = pw[j * (maxdeg + 1) + e - 1] * x[j];
    }
    for (std::size_t b = 0; b < nb; ++b) {
      double v = 1.0;
      for (std::size_t j = 0; j < na; ++j) v *= pw[j * (maxdeg + 1) + st.exponents[b][j]];
      a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(b)) = v;
    }
  }
  return a;
}

Eigen::MatrixXd RegressionPlan::project(std::size_t node, const Eigen::MatrixXd& rhs) const {
  return projector(node)(rhs);
}

RegressionPlan::Projector::Projector(const RegressionPlan& plan, std::size_t node) : plan_(&plan), node_(node) {
  if (node >= plan.nodes_) throw std::out_of_range("projector: node beyond the grid");
  if (plan.options_.basis == BasisKind::Polynomial) {
    design_ = plan.design(node);
    return;
  }
  corners_ = std::size_t{1} << plan.steps_[node].active.size();
  index_.resize(plan.samples_ * corners_);
  weight_.resize(plan.samples_ * corners_);
  std::vector<std::size_t> idx(corners_);
  for (std::size_t m = 0; m < plan.samples_; ++m) {
    plan.spline_values(m, node, idx.data(), &weight_[m * corners_]);
    for (std::size_t a = 0; a < corners_; ++a) index_[m * corners_ + a] = static_cast<std::uint32_t>(idx[a]);
  }
}

Eigen::MatrixXd RegressionPlan::Projector::operator()(const Eigen::MatrixXd& rhs) const {
  if (static_cast<std::size_t>(rhs.rows()) != plan_->samples_)
    throw std::invalid_argument("project: rhs has wrong row count");
  if (plan_->options_.basis == BasisKind::LinearSpline) return plan_->project_spline(node_, *this, rhs);
  return plan_->project_polynomial(node_, design_, rhs);
}

Eigen::MatrixXd RegressionPlan::project_polynomial(std::size_t node, const Eigen::MatrixXd& a,
                                                   const Eigen::MatrixXd& rhs) const {
  const Eigen::MatrixXd moments = (a.transpose() * rhs) / static_cast<double>(samples_);
  const Eigen::MatrixXd coef = steps_[node].gram_pinv * moments;
  return a * coef;
}

Eigen::MatrixXd RegressionPlan::project_spline(std::size_t node, const Projector& basis, const Eigen::MatrixXd& rhs) const {
  const Step& st = steps_[node];
  const auto nb = static_cast<Eigen::Index>(st.spline_size);
  const Eigen::Index cols = rhs.cols();
  const std::size_t cnt = basis.corners_;
  const std::uint32_t* idx = basis.index_.data();
  const double* wt = basis.weight_.data();
  Eigen::MatrixXd moments = Eigen::MatrixXd::Zero(nb, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double* r = rhs.col(c).data();
    double* mo = moments.col(c).data();
    for (std::size_t m = 0; m < samples_; ++m)
      for (std::size_t a = 0; a < cnt; ++a) mo[idx[m * cnt + a]] += wt[m * cnt + a] * r[m];
  }
  const Eigen::MatrixXd coef = st.gram_pinv * moments;
  Eigen::MatrixXd fit(static_cast<Eigen::Index>(samples_), cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double* co = coef.col(c).data();
    double* f = fit.col(c).data();
    for (std::size_t m = 0; m < samples_; ++m) {
      double v = 0.0;
      for (std::size_t a = 0; a < cnt; ++a) v += wt[m * cnt + a] * co[idx[m * cnt + a]];
      f[m] = v;
    }
  }
  return fit;
}

std::string RegressionPlan::describe() const {
  std::ostringstream os;
  if (options_.basis == BasisKind::LinearSpline)
    os << "linear_spline(max_basis=" << options_.spline_basis << ";";
  else
    os << "polynomial(degree<=" << options_.degree << ";";
  for (std::size_t i = 0; i < keys_.size(); ++i) os << (i ? "," : "") << keys_[i];
  os << ")";
  return os.str();
}

std::shared_ptr<const RegressionPlan> PlanCache::get(const BrownianBatch& batch, const std::vector<Feature>& features,
                                                     const RegressionOptions& options) {
  std::ostringstream key;
  key << static_cast<const void*>(batch.data().data()) << '|' << batch.seed() << '|' << batch.samples() << '|'
      << batch.grid().levels() << '|' << batch.grid().horizon() << '|' << batch.dimension() << '|' << options.degree
      << '|' << options.max_basis << '|' << to_string(options.basis) << '|' << options.spline_basis << '|'
      << options.paths_per_function << '|' << fingerprint(batch.data());
  for (const auto& f : unique_features(features)) key << '|' << f.key;
  const std::string k = key.str();
  std::lock_guard<std::mutex> lock(mutex_);
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->key == k) {
      Entry e = *it;
      entries_.erase(it);
      entries_.push_back(e);
      return e.plan;
    }
  }
  // Drop the oldest plan before building so two large plans never coexist beyond capacity.
  while (!entries_.empty() && entries_.size() >= capacity_) entries_.erase(entries_.begin());
  auto plan = std::make_shared<const RegressionPlan>(batch, features, options);
  entries_.push_back({k, plan});
  return plan;
}

void PlanCache::clear() {
  std::lock_guard<std::mutex> lock(mutex_);
  entries_.clear();
}

PlanCache& PlanCache::global() {
  static PlanCache cache(1);
  return cache;
}

}  // namespace dynrisk
