#include "dynrisk/generators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dynrisk/stats.hpp"

namespace dynrisk {

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void require_nonneg(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw std::domain_error(std::string(what) + " must be a finite nonnegative number");
}

/// Value of the source generator seen by a cap: the envelope b|y| + phi(|z|)|z| for
/// superquadratic sources, the source itself otherwise.
double cap_base(const GeneratorSpec& src, double y, double r) {
  if (src.kind == GeneratorKind::Superquadratic) return src.b * std::abs(y) + src.phi(r) * r;
  return src.at(y, r);
}

}  // namespace

std::string to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::Entropic: return "entropic";
    case GeneratorKind::LipschitzZ: return "lipschitz";
    case GeneratorKind::Quadratic: return "quadratic";
    case GeneratorKind::Superquadratic: return "superquadratic";
    case GeneratorKind::Capped: return "capped";
  }
  return "?";
}

double PowerFunction::operator()(double x) const {
  if (power == 0.0) return coef;
  return coef * std::pow(x, power);
}

double GeneratorSpec::at(double y, double r) const {
  switch (kind) {
    case GeneratorKind::Entropic: return 0.5 * r * r;
    case GeneratorKind::LipschitzZ: return kappa * r;
    case GeneratorKind::Quadratic: return a + b * std::max(-y, 0.0) + c * r * r;
    case GeneratorKind::Superquadratic: return phi.coef * std::pow(r, phi.power + 1.0) / (phi.power + 1.0);
    case GeneratorKind::Capped: return cap_base(*source, y, std::min(r, radius));
  }
  return 0.0;
}

double GeneratorSpec::evaluate(double, double y, std::span<const double> z) const { return at(y, norm(z)); }

double GeneratorSpec::conjugate(double beta, std::span<const double> q) const { return conjugate_norm(beta, norm(q)); }

double GeneratorSpec::conjugate_norm(double beta, double r) const {
  if (std::isnan(beta) || std::isnan(r)) return kInfinity;
  switch (kind) {
    case GeneratorKind::Entropic:
      return beta == 0.0 ? 0.5 * r * r : kInfinity;
    case GeneratorKind::LipschitzZ:
      return beta == 0.0 && r <= kappa ? 0.0 : kInfinity;
    case GeneratorKind::Quadratic: {
      if (beta < 0.0 || beta > b) return kInfinity;
      if (c == 0.0) return r == 0.0 ? -a : kInfinity;
      return r * r / (4.0 * c) - a;
    }
    case GeneratorKind::Superquadratic: {
      if (beta != 0.0) return kInfinity;
      const double p = phi.power;
      if (p == 0.0) return r <= phi.coef ? 0.0 : kInfinity;
      if (r == 0.0) return 0.0;
      if (phi.coef == 0.0) return kInfinity;
      const double s = std::pow(r / phi.coef, 1.0 / p);
      return s * r * p / (p + 1.0);
    }
    case GeneratorKind::Capped: {
      // The frozen generator is bounded in z, so the supremum over z is finite only at q = 0.
      if (r != 0.0) return kInfinity;
      const GeneratorSpec& src = *source;
      switch (src.kind) {
        case GeneratorKind::Quadratic: return (beta < 0.0 || beta > src.b) ? kInfinity : -src.a;
        case GeneratorKind::Superquadratic: return std::abs(beta) <= src.b ? 0.0 : kInfinity;
        default: return beta == 0.0 ? 0.0 : kInfinity;
      }
    }
  }
  return kInfinity;
}

Growth GeneratorSpec::growth() const {
  switch (kind) {
    case GeneratorKind::Entropic: return {0.0, 0.0, 0.5};
    case GeneratorKind::LipschitzZ: return {0.5 * kappa, 0.0, 0.5 * kappa};
    case GeneratorKind::Quadratic: return {a, b, c};
    case GeneratorKind::Superquadratic: return {0.0, b, kInfinity};
    case GeneratorKind::Capped: {
      const GeneratorSpec& src = *source;
      if (src.kind == GeneratorKind::Superquadratic)
        return {0.0, src.b, src.phi(radius) + radius * src.theta(radius)};
      return src.growth();
    }
  }
  return {};
}

bool GeneratorSpec::depends_on_y() const {
  switch (kind) {
    case GeneratorKind::Quadratic: return b > 0.0;
    case GeneratorKind::Capped:
      return source->kind == GeneratorKind::Superquadratic ? source->b > 0.0 : source->depends_on_y();
    default: return false;
  }
}

double GeneratorSpec::z_lipschitz() const {
  switch (kind) {
    case GeneratorKind::Entropic: return kInfinity;
    case GeneratorKind::LipschitzZ: return kappa;
    case GeneratorKind::Quadratic: return c == 0.0 ? 0.0 : kInfinity;
    case GeneratorKind::Superquadratic: return phi.power == 0.0 ? phi.coef : kInfinity;
    case GeneratorKind::Capped: {
      const GeneratorSpec& src = *source;
      switch (src.kind) {
        case GeneratorKind::Entropic: return radius;
        case GeneratorKind::LipschitzZ: return src.kappa;
        case GeneratorKind::Quadratic: return 2.0 * src.c * radius;
        case GeneratorKind::Superquadratic: return src.phi(radius) + radius * src.theta(radius);
        case GeneratorKind::Capped: return src.z_lipschitz();
      }
    }
  }
  return kInfinity;
}

std::string GeneratorSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case GeneratorKind::Entropic: os << "entropic"; break;
    case GeneratorKind::LipschitzZ: os << "lipschitz(kappa=" << kappa << ")"; break;
    case GeneratorKind::Quadratic: os << "quadratic(a=" << a << ",b=" << b << ",c=" << c << ")"; break;
    case GeneratorKind::Superquadratic:
      os << "superquadratic(b=" << b << ",phi=" << phi.coef << "x^" << phi.power << ")";
      break;
    case GeneratorKind::Capped: os << "capped(" << source->describe() << ",K=" << radius << ")"; break;
  }
  return os.str();
}

GeneratorSpec entropic() { return GeneratorSpec{}; }

GeneratorSpec lipschitz_z(double kappa) {
  require_nonneg(kappa, "kappa");
  GeneratorSpec g;
  g.kind = GeneratorKind::LipschitzZ;
  g.kappa = kappa;
  return g;
}

GeneratorSpec quadratic(double a, double b, double c) {
  require_nonneg(a, "a");
  require_nonneg(b, "b");
  require_nonneg(c, "c");
  GeneratorSpec g;
  g.kind = GeneratorKind::Quadratic;
  g.a = a;
  g.b = b;
  g.c = c;
  return g;
}

GeneratorSpec superquadratic(double b, PowerFunction phi, PowerFunction theta) {
  require_nonneg(b, "b");
  require_nonneg(phi.coef, "phi coefficient");
  require_nonneg(phi.power, "phi power");
  require_nonneg(theta.coef, "theta coefficient");
  require_nonneg(theta.power, "theta power");
  GeneratorSpec g;
  g.kind = GeneratorKind::Superquadratic;
  g.b = b;
  g.phi = phi;
  g.theta = theta;
  return g;
}

GeneratorSpec superquadratic_power(double p, double b) {
  require_nonneg(p, "power");
  if (p > 0.0 && p < 1.0) throw std::domain_error("superquadratic_power: power must be 0 or at least 1");
  PowerFunction theta{p, p > 0.0 ? p - 1.0 : 0.0};
  if (p == 0.0) theta = {0.0, 0.0};
  return superquadratic(b, PowerFunction{1.0, p}, theta);
}

double cap_radius(double horizon) {
  if (!(horizon > 0.0)) throw std::domain_error("cap radius: horizon must be positive");
  return horizon * std::exp(horizon);
}

GeneratorSpec cap_generator(const GeneratorSpec& g, double radius) {
  if (!(radius > 0.0)) throw std::domain_error("cap_generator: radius must be positive");
  if (g.kind == GeneratorKind::Capped) {
    GeneratorSpec out = g;
    out.radius = std::min(g.radius, radius);
    return out;
  }
  GeneratorSpec out;
  out.kind = GeneratorKind::Capped;
  out.radius = radius;
  out.source = std::make_shared<const GeneratorSpec>(g);
  return out;
}

GeneratorSpec cap_at_horizon(const GeneratorSpec& g, double horizon) { return cap_generator(g, cap_radius(horizon)); }

std::string to_string(BoundSource s) {
  switch (s) {
    case BoundSource::QuadraticGrowth: return "quadratic_growth";
    case BoundSource::KappaDominated: return "kappa_dominated";
    case BoundSource::CappedSuperquadratic: return "capped_superquadratic";
    case BoundSource::PathLipschitzSuperquadratic: return "path_lipschitz";
  }
  return "?";
}

BoundSource parse_bound_source(const std::string& tag) {
  for (BoundSource s : {BoundSource::QuadraticGrowth, BoundSource::KappaDominated, BoundSource::CappedSuperquadratic,
                        BoundSource::PathLipschitzSuperquadratic})
    if (to_string(s) == tag) return s;
  throw std::invalid_argument("unknown bound source '" + tag + "'");
}

BoundFunction quadratic_growth_bound(double a, double b, double c, double horizon) {
  require_nonneg(a, "a");
  require_nonneg(b, "b");
  require_nonneg(c, "c");
  if (!(horizon > 0.0)) throw std::domain_error("bound: horizon must be positive");
  // The constant term integrates to E(0) = a (e^{bT} - 1) / b, which is aT when b = 0.
  const double constant = b > 0.0 ? a * std::expm1(b * horizon) / b : a * horizon;
  return {constant, std::exp(b * horizon) * c * horizon, BoundSource::QuadraticGrowth};
}

BoundFunction kappa_bound(double kappa, double horizon) {
  require_nonneg(kappa, "kappa");
  if (!(horizon > 0.0)) throw std::domain_error("bound: horizon must be positive");
  return {kappa, kappa * horizon, BoundSource::KappaDominated};
}

BoundFunction superquadratic_bound(double b, double c, double horizon, BoundSource source) {
  if (source != BoundSource::CappedSuperquadratic && source != BoundSource::PathLipschitzSuperquadratic)
    throw std::invalid_argument("superquadratic_bound: source must be a superquadratic result");
  auto l = quadratic_growth_bound(0.0, b, c, horizon);
  l.source = source;
  return l;
}

BoundFunction bound_function(BoundSource source, const GeneratorSpec& g, double horizon) {
  switch (source) {
    case BoundSource::QuadraticGrowth: {
      auto gr = g.growth();
      if (!std::isfinite(gr.c)) throw std::invalid_argument("quadratic growth bound needs finite growth constants");
      return quadratic_growth_bound(gr.a, gr.b, gr.c, horizon);
    }
    case BoundSource::KappaDominated: {
      double k = g.z_lipschitz();
      if (!std::isfinite(k) || g.depends_on_y())
        throw std::invalid_argument("kappa-dominated bound needs a y-free generator Lipschitz in z");
      return kappa_bound(k, horizon);
    }
    case BoundSource::CappedSuperquadratic:
    case BoundSource::PathLipschitzSuperquadratic: {
      const GeneratorSpec capped =
          g.kind == GeneratorKind::Superquadratic ? cap_at_horizon(g, horizon) : g;
      if (capped.kind != GeneratorKind::Capped || capped.source->kind != GeneratorKind::Superquadratic)
        throw std::invalid_argument("superquadratic bound needs a superquadratic generator");
      auto gr = capped.growth();
      return superquadratic_bound(gr.b, gr.c, horizon, source);
    }
  }
  throw std::invalid_argument("unknown bound source");
}

double conjugate_of_bound_raw(const BoundFunction& l, double r) {
  if (!(r >= 0.0)) throw std::domain_error("conjugate_of_bound: r must be nonnegative");
  if (l.quad_coef == 0.0) return r == 0.0 ? -l.a_coef : kInfinity;
  return r * r / (4.0 * l.quad_coef) - l.a_coef;
}

double conjugate_of_bound(const BoundFunction& l, double r) { return std::max(0.0, conjugate_of_bound_raw(l, r)); }

double inverse_conjugate_of_bound(const BoundFunction& l, double y) {
  if (y <= 0.0) return 0.0;
  if (l.quad_coef == 0.0) return 0.0;
  return std::sqrt(4.0 * l.quad_coef * (y + l.a_coef));
}

}  // namespace dynrisk
