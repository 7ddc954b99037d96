#include <cmath>
#include <limits>
#include <string>

#include "firecast/distributions.hpp"
#include "firecast/errors.hpp"

namespace firecast::dist {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Standardised GPD pieces at z = y / sigma. `expo` is the exponential-scale
// argument t with H(z) = 1 - exp(-t); `one_plus` is 1 + xi z.
struct GpdCore {
  double expo;
  double one_plus;
  double log_one_plus;
};

GpdCore gpd_core(double z, double xi) {
  GpdCore c{};
  c.one_plus = 1.0 + xi * z;
  if (std::abs(xi) < kXiBranchTolerance) {
    // log1p(xi z) / xi = z - xi z^2 / 2 + O(xi^2)
    c.expo = z - 0.5 * xi * z * z;
    c.log_one_plus = xi * z;
  } else {
    c.log_one_plus = std::log1p(xi * z);
    c.expo = c.log_one_plus / xi;
  }
  return c;
}

void check_support(double y, const EgpParams& p) {
  if (!(y >= 0.0)) throw DomainError("eGP: y must be non-negative, got " + std::to_string(y));
  if (y > p.upper_bound())
    throw DomainError("eGP: y = " + std::to_string(y) + " beyond the upper support bound " +
                      std::to_string(p.upper_bound()));
}

// expm1(-xi * w) / xi with its xi -> 0 limit -w.
double expm1_ratio(double xi, double w) {
  if (std::abs(xi) < kXiBranchTolerance) return -w + 0.5 * xi * w * w;
  return std::expm1(-xi * w) / xi;
}

}  // namespace

void EgpParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ParameterError("eGP: sigma must be positive, got " + std::to_string(sigma));
  if (!(kappa > 0.0) || !std::isfinite(kappa))
    throw ParameterError("eGP: kappa must be positive, got " + std::to_string(kappa));
  if (!std::isfinite(xi)) throw ParameterError("eGP: xi must be finite");
}

double EgpParams::upper_bound() const {
  if (xi < 0.0 && std::abs(xi) >= kXiBranchTolerance) return -sigma / xi;
  return kInf;
}

double gpd_cdf(double y, double sigma, double xi) {
  return egp_cdf(y, EgpParams{sigma, xi, 1.0});
}

double egp_cdf(double y, const EgpParams& p) {
  p.validate();
  check_support(y, p);
  if (y == 0.0) return 0.0;
  const GpdCore c = gpd_core(y / p.sigma, p.xi);
  const double base = -std::expm1(-c.expo);
  if (p.kappa == 1.0) return base;
  return std::exp(p.kappa * std::log(base));
}

double egp_log_pdf(double y, const EgpParams& p) {
  p.validate();
  check_support(y, p);
  const double z = y / p.sigma;
  const GpdCore c = gpd_core(z, p.xi);
  if (c.one_plus <= 0.0) return -kInf;
  const double base = -std::expm1(-c.expo);
  double lower = 0.0;
  if (p.kappa != 1.0) {
    if (base == 0.0) return p.kappa > 1.0 ? -kInf : kInf;
    lower = (p.kappa - 1.0) * std::log(base);
  }
  return std::log(p.kappa) + lower - std::log(p.sigma) - c.expo - c.log_one_plus;
}

double egp_pdf(double y, const EgpParams& p) { return std::exp(egp_log_pdf(y, p)); }

double egp_quantile(double u, const EgpParams& p) {
  p.validate();
  if (!(u > 0.0 && u < 1.0))
    throw DomainError("eGP quantile: u must lie in (0, 1), got " + std::to_string(u));
  const double v = p.kappa == 1.0 ? u : std::exp(std::log(u) / p.kappa);
  const double w = std::log1p(-v);
  return p.sigma * expm1_ratio(p.xi, w);
}

std::vector<double> egp_sample(std::size_t n, const EgpParams& p, std::uint64_t seed) {
  p.validate();
  std::mt19937_64 rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) x = egp_quantile(uniform_open(rng), p);
  return out;
}

double egp_sigma_from_eta(const MedianLink& link, double xi, double kappa) {
  if (!(kappa > 0.0)) throw ParameterError("eGP link: kappa must be positive");
  if (!(link.alpha > 0.0 && link.alpha < 1.0))
    throw ParameterError("eGP link: alpha must lie in (0, 1)");
  const double w = std::log1p(-std::exp(std::log(link.alpha) / kappa));
  return std::exp(link.eta) / expm1_ratio(xi, w);
}

LogLikEta egp_loglik_eta(double y, double eta, double xi, double kappa, double alpha) {
  if (!(y > 0.0)) throw DomainError("eGP log-likelihood: y must be positive");
  if (!(kappa > 0.0)) throw ParameterError("eGP log-likelihood: kappa must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("eGP log-likelihood: alpha in (0, 1)");

  const double w = std::log1p(-std::exp(std::log(alpha) / kappa));
  const double log_c = std::log(expm1_ratio(xi, w));
  const double log_sigma = eta - log_c;
  const double z = std::exp(std::log(y) + log_c - eta);

  const GpdCore c = gpd_core(z, xi);
  if (c.one_plus <= 0.0) return {-kInf, 0.0, 0.0};

  const double surv = std::exp(-c.expo);
  const double base = -std::expm1(-c.expo);  // H(z)
  const double dens = surv / c.one_plus;     // H'(z)
  const double ratio = dens / base;          // H'/H
  const double d2H_over_H = -(1.0 + xi) * ratio / c.one_plus;

  const double a1 = (kappa - 1.0) * ratio - (1.0 + xi) / c.one_plus;
  const double a2 = (kappa - 1.0) * (d2H_over_H - ratio * ratio) +
                    xi * (1.0 + xi) / (c.one_plus * c.one_plus);

  LogLikEta out;
  out.value = std::log(kappa) - log_sigma + (kappa - 1.0) * std::log(base) - c.expo -
              c.log_one_plus;
  out.grad = -1.0 - z * a1;
  out.hess = z * a1 + z * z * a2;
  return out;
}

double uniform_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log1p_exp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace firecast::dist
