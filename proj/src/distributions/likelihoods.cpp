#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "firecast/distributions.hpp"
#include "firecast/errors.hpp"

namespace firecast::dist {

namespace {

// lambda / (1 - exp(-lambda)) and its derivative in lambda.
struct TruncMean {
  double mean;
  double dmean;
};

TruncMean trunc_mean(double lambda) {
  if (lambda < 1e-4) {
    // 1 + l/2 + l^2/12 - l^4/720
    const double l = lambda;
    return {1.0 + l / 2.0 + l * l / 12.0, 0.5 + l / 6.0 - l * l * l / 180.0};
  }
  const double q = -std::expm1(-lambda);  // 1 - exp(-lambda)
  const double e = std::exp(-lambda);
  return {lambda / q, (q - lambda * e) / (q * q)};
}

double gamma_median_unit(double shape) { return boost::math::gamma_p_inv(shape, 0.5); }

}  // namespace

double trunc_poisson_log_pmf(long long y, double lambda) {
  if (y < 1) throw DomainError("zero-truncated Poisson: y must be >= 1");
  if (!(lambda > 0.0)) throw ParameterError("zero-truncated Poisson: lambda must be positive");
  const double yd = static_cast<double>(y);
  return yd * std::log(lambda) - lambda - std::lgamma(yd + 1.0) -
         std::log(-std::expm1(-lambda));
}

double trunc_poisson_pmf(long long y, const TruncPoissonParams& p) {
  return std::exp(trunc_poisson_log_pmf(y, p.lambda));
}

long long trunc_poisson_draw(double lambda, std::mt19937_64& rng) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw DomainError("zero-truncated Poisson draw: invalid rate " + std::to_string(lambda));
  if (lambda > 10.0) {
    std::poisson_distribution<long long> pois(lambda);
    for (;;) {
      const long long k = pois(rng);
      if (k >= 1) return k;
    }
  }
  const double u = uniform_open(rng);
  double cum = 0.0;
  long long k = 1;
  double pk = std::exp(std::log(lambda) - lambda - std::log(-std::expm1(-lambda)));
  for (;; ++k) {
    cum += pk;
    if (u <= cum || k > 10000) return k;
    pk *= lambda / static_cast<double>(k + 1);
  }
}

LogLikEta trunc_poisson_loglik_eta(long long y, double eta) {
  if (y < 1) throw DomainError("zero-truncated Poisson log-likelihood: y must be >= 1");
  const double lambda = std::exp(eta);
  const auto tm = trunc_mean(lambda);
  LogLikEta out;
  const double yd = static_cast<double>(y);
  double log_norm;
  if (lambda < 1e-300)
    log_norm = eta;  // log(1 - e^-l) ~ log l
  else
    log_norm = std::log(-std::expm1(-lambda));
  out.value = yd * eta - lambda - std::lgamma(yd + 1.0) - log_norm;
  out.grad = yd - tm.mean;
  out.hess = -lambda * tm.dmean;
  return out;
}

LogLikEta bernoulli_loglik_eta(int z, double eta) {
  if (z != 0 && z != 1) throw DomainError("Bernoulli log-likelihood: z must be 0 or 1");
  const double p = inv_logit(eta);
  LogLikEta out;
  out.value = z * eta - log1p_exp(eta);
  out.grad = z - p;
  out.hess = -p * (1.0 - p);
  return out;
}

double AltLikelihoodParams::scale_from_eta(double eta) const {
  if (!(shape > 0.0)) throw ParameterError("alternative likelihood: shape must be positive");
  switch (family) {
    case AltFamily::Gamma:
      return std::exp(eta) / gamma_median_unit(shape);
    case AltFamily::Weibull:
      return std::exp(eta - std::log(std::numbers::ln2) / shape);
  }
  return 0.0;
}

LogLikEta alt_loglik_eta(double y, double eta, const AltLikelihoodParams& params) {
  if (!(y > 0.0)) throw DomainError("alternative log-likelihood: y must be positive");
  const double a = params.shape;
  const double scale = params.scale_from_eta(eta);
  LogLikEta out;
  if (params.family == AltFamily::Gamma) {
    const double r = y / scale;
    out.value = -std::lgamma(a) - a * std::log(scale) + (a - 1.0) * std::log(y) - r;
    out.grad = -a + r;
    out.hess = -r;
  } else {
    const double r = std::pow(y / scale, a);
    out.value = std::log(a) + (a - 1.0) * std::log(y) - a * std::log(scale) - r;
    out.grad = -a + a * r;
    out.hess = -a * a * r;
  }
  return out;
}

double alt_quantile(double u, double eta, const AltLikelihoodParams& params) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("alternative quantile: u must lie in (0, 1)");
  const double scale = params.scale_from_eta(eta);
  if (params.family == AltFamily::Gamma) return scale * boost::math::gamma_p_inv(params.shape, u);
  return scale * std::pow(-std::log1p(-u), 1.0 / params.shape);
}

LogLikEta gaussian_loglik_eta(double y, double eta, double precision) {
  if (!(precision > 0.0)) throw ParameterError("Gaussian log-likelihood: precision must be positive");
  const double r = y - eta;
  LogLikEta out;
  out.value = 0.5 * std::log(precision / (2.0 * std::numbers::pi)) - 0.5 * precision * r * r;
  out.grad = precision * r;
  out.hess = -precision;
  return out;
}

}  // namespace firecast::dist
