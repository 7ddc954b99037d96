#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "firecast/errors.hpp"
#include "firecast/latent.hpp"

namespace firecast::latent {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sigmoid(double x) { return -dist::log1p_exp(-x); }
}  // namespace

double Transform::to_natural(double x) const {
  switch (kind) {
    case TransformKind::Log: return std::exp(x);
    case TransformKind::Logit: return lo + (hi - lo) * dist::inv_logit(x);
    case TransformKind::Identity: return x;
  }
  return x;
}

double Transform::to_internal(double v) const {
  switch (kind) {
    case TransformKind::Log:
      if (!(v > 0.0)) throw DomainError("log transform needs a positive value");
      return std::log(v);
    case TransformKind::Logit: {
      if (!(v > lo && v < hi)) throw DomainError("logit transform: value outside its bounds");
      const double p = (v - lo) / (hi - lo);
      return std::log(p) - std::log1p(-p);
    }
    case TransformKind::Identity: return v;
  }
  return v;
}

double Transform::log_jacobian(double x) const {
  switch (kind) {
    case TransformKind::Log: return x;
    case TransformKind::Logit: return std::log(hi - lo) + log_sigmoid(x) + log_sigmoid(-x);
    case TransformKind::Identity: return 0.0;
  }
  return 0.0;
}

double bym2_phi_distance(double phi, const std::vector<double>& eigen) {
  double kld = 0.0;
  for (double g : eigen) {
    const double a = phi * (g - 1.0);
    kld += a - std::log1p(a);
  }
  kld *= 0.5;
  return std::sqrt(2.0 * std::max(kld, 0.0));
}

namespace {

double phi_distance_derivative(double phi, const std::vector<double>& eigen) {
  // d = sqrt(2 K), K' = 0.5 sum (g-1)^2 phi / (1 + phi (g-1)); small-phi limit d' = sqrt(0.5 sum (g-1)^2)
  double s2 = 0.0, kprime = 0.0;
  for (double g : eigen) {
    const double b = g - 1.0;
    s2 += b * b;
    kprime += 0.5 * b * b * phi / (1.0 + phi * b);
  }
  const double d = bym2_phi_distance(phi, eigen);
  if (phi < 1e-6 || d == 0.0) return std::sqrt(0.5 * s2);
  return 2.0 * kprime / (2.0 * d);
}

double phi_log_density(double phi, const std::vector<double>& eigen, double rate) {
  if (!(phi > 0.0 && phi < 1.0)) return kNegInf;
  const double d = bym2_phi_distance(phi, eigen);
  const double d1 = bym2_phi_distance(1.0, eigen);
  const double norm = -std::expm1(-rate * d1);
  return std::log(rate) - rate * d + std::log(phi_distance_derivative(phi, eigen)) - std::log(norm);
}

}  // namespace

double Prior::log_density(double v) const {
  switch (kind) {
    case PriorKind::Flat: return 0.0;
    case PriorKind::Normal:
      return -0.5 * std::log(2.0 * std::numbers::pi * b) - 0.5 * (v - a) * (v - a) / b;
    case PriorKind::Gamma:
      if (!(v > 0.0)) return kNegInf;
      return a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(v) - b * v;
    case PriorKind::PcPrec: {
      if (!(v > 0.0)) return kNegInf;
      const double lambda = -std::log(b) / a;
      return std::log(lambda / 2.0) - 1.5 * std::log(v) - lambda / std::sqrt(v);
    }
    case PriorKind::PcBym2Phi: return phi_log_density(v, eigen, phi_rate);
    case PriorKind::PcXi: {
      const double p = dist::pc_prior_xi(v, pc);
      return p > 0.0 ? std::log(p) : kNegInf;
    }
    case PriorKind::PcKappa: {
      if (!(v > 0.0)) return kNegInf;
      const double p = dist::pc_prior_kappa(v, pc);
      return p > 0.0 ? std::log(p) : kNegInf;
    }
  }
  return 0.0;
}

Prior Prior::gamma(double shape, double rate) {
  if (!(shape > 0.0 && rate > 0.0)) throw ParameterError("gamma prior: shape and rate must be positive");
  Prior p;
  p.kind = PriorKind::Gamma;
  p.a = shape;
  p.b = rate;
  return p;
}

Prior Prior::normal(double mean, double variance) {
  if (!(variance > 0.0)) throw ParameterError("normal prior: variance must be positive");
  Prior p;
  p.kind = PriorKind::Normal;
  p.a = mean;
  p.b = variance;
  return p;
}

Prior Prior::pc_prec(double u, double alpha) {
  if (!(u > 0.0) || !(alpha > 0.0 && alpha < 1.0))
    throw ParameterError("pc precision prior: need u > 0 and 0 < alpha < 1");
  Prior p;
  p.kind = PriorKind::PcPrec;
  p.a = u;
  p.b = alpha;
  return p;
}

Prior Prior::pc_bym2_phi(std::vector<double> eigen, double u, double alpha) {
  if (eigen.empty()) throw ParameterError("pc phi prior: no eigenvalues");
  if (!(u > 0.0 && u < 1.0) || !(alpha > 0.0 && alpha < 1.0))
    throw ParameterError("pc phi prior: need 0 < u < 1 and 0 < alpha < 1");
  Prior p;
  p.kind = PriorKind::PcBym2Phi;
  p.eigen = std::move(eigen);
  p.a = u;
  p.b = alpha;
  const double du = bym2_phi_distance(u, p.eigen);
  const double d1 = bym2_phi_distance(1.0, p.eigen);
  // P(phi < u) = (1 - exp(-r du)) / (1 - exp(-r d1)); increases from du/d1 (r -> 0) to 1
  auto prob = [&](double log_rate) {
    const double r = std::exp(log_rate);
    return std::expm1(-r * du) / std::expm1(-r * d1);
  };
  const double floor = du / d1;
  if (alpha <= floor) {
    // unattainable: the uniform-in-distance limit is the closest member of the family
    p.phi_rate = 1e-6;
    return p;
  }
  auto f = [&](double lr) { return prob(lr) - alpha; };
  double lo = std::log(1e-6), hi = std::log(1e6);
  std::uintmax_t iters = 200;
  const auto root = boost::math::tools::toms748_solve(
      f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  p.phi_rate = std::exp(0.5 * (root.first + root.second));
  return p;
}

Prior Prior::pc_xi(const dist::PcPriorConfig& cfg) {
  cfg.validate();
  Prior p;
  p.kind = PriorKind::PcXi;
  p.pc = cfg;
  return p;
}

Prior Prior::pc_kappa(const dist::PcPriorConfig& cfg) {
  cfg.validate();
  Prior p;
  p.kind = PriorKind::PcKappa;
  p.pc = cfg;
  return p;
}

}  // namespace firecast::latent
