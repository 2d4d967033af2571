#pragma once

#include <memory>
#include <span>
#include <string>

namespace dynrisk {

enum class GeneratorKind { Entropic, LipschitzZ, Quadratic, Superquadratic, Capped };

std::string to_string(GeneratorKind k);

/// Constants (a, b, c) with g(t, y, z) <= a + b|y| + c|z|^2.
struct Growth {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// x -> coef * x^power on [0, inf); the only phi/theta family accepted in configs.
struct PowerFunction {
  double coef = 1.0;
  double power = 1.0;

  double operator()(double x) const;
};

/// A deterministic BSDE generator. Every kind depends on z only through |z|.
///
///   Entropic         |z|^2 / 2
///   LipschitzZ       kappa |z|
///   Quadratic        a + b y^- + c |z|^2
///   Superquadratic   Psi(|z|) = int_0^|z| phi, with b kept for the envelope b|y| + phi(|z|)|z|
///   Capped           h(y, K z/|z|) for |z| > K, where h is the source generator, or the
///                    envelope b|y| + phi(|z|)|z| for a superquadratic source
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Entropic;
  double kappa = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  PowerFunction phi;
  PowerFunction theta;
  double radius = 0.0;
  std::shared_ptr<const GeneratorSpec> source;

  /// Value at (y, |z|).
  double at(double y, double z_norm) const;
  double evaluate(double t, double y, std::span<const double> z) const;
  /// sup over (y, z) of -beta y + z.q - g(y, z), possibly +inf.
  double conjugate(double beta, std::span<const double> q) const;
  double conjugate_norm(double beta, double q_norm) const;

  Growth growth() const;
  bool depends_on_y() const;
  /// Lipschitz constant in z, +inf when g is not Lipschitz in z.
  double z_lipschitz() const;
  bool normalized() const { return at(0.0, 0.0) == 0.0; }
  std::string describe() const;
};

GeneratorSpec entropic();
GeneratorSpec lipschitz_z(double kappa);
GeneratorSpec quadratic(double a, double b, double c);
/// g(z) = Psi(|z|) with Psi' = phi. theta must bound the derivative of phi.
GeneratorSpec superquadratic(double b, PowerFunction phi, PowerFunction theta);
/// Superquadratic power family phi(x) = x^p, theta(x) = p x^(p-1).
GeneratorSpec superquadratic_power(double p, double b = 0.0);

/// Radial freeze beyond the given radius.
GeneratorSpec cap_generator(const GeneratorSpec& g, double radius);
/// Radial freeze at K = T e^T. Its quadratic constant is phi(K) + K theta(K) for superquadratic sources.
GeneratorSpec cap_at_horizon(const GeneratorSpec& g, double horizon);

double cap_radius(double horizon);

/// Which concentration result a bound comes from; determines admissible claim classes.
enum class BoundSource {
  QuadraticGrowth,        // l = e^{bT} c T lambda^2 + a, claims in Lambda_+ (Lambda if g is y-free)
  KappaDominated,         // l = kappa (T lambda^2 + 1), path-Lipschitz claims
  CappedSuperquadratic,   // l = e^{bT} c T lambda^2, claims in Lambda'_+ (Lambda' if g is y-free)
  PathLipschitzSuperquadratic,  // same l, path-Lipschitz claims through discretization
};

std::string to_string(BoundSource s);
BoundSource parse_bound_source(const std::string& tag);

/// l(lambda) = quad_coef lambda^2 + a_coef.
struct BoundFunction {
  double a_coef = 0.0;
  double quad_coef = 0.0;
  BoundSource source = BoundSource::QuadraticGrowth;

  double operator()(double lambda) const { return quad_coef * lambda * lambda + a_coef; }
};

BoundFunction quadratic_growth_bound(double a, double b, double c, double horizon);
BoundFunction kappa_bound(double kappa, double horizon);
BoundFunction superquadratic_bound(double b, double c, double horizon, BoundSource source);
/// Bound implied by the generator's own constants for the given result.
BoundFunction bound_function(BoundSource source, const GeneratorSpec& g, double horizon);

/// l*(r) = sup_{lambda >= 0} (lambda r - l(lambda)), clipped at 0.
double conjugate_of_bound(const BoundFunction& l, double r);
/// Unclipped l*(r); equals -a_coef at r = 0.
double conjugate_of_bound_raw(const BoundFunction& l, double r);
/// Smallest r >= 0 with l*(r) >= y, for the clipped conjugate.
double inverse_conjugate_of_bound(const BoundFunction& l, double y);

}  // namespace dynrisk
