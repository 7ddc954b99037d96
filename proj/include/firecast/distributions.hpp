#pragma once

// Observation models of the hurdle stage and penalised-complexity priors on
// the eGP shape parameters. Every function here is pure.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace firecast::dist {

/// Below this |xi| the exponential-tail formulas (with a first-order series
/// correction) replace the xi != 0 expressions.
inline constexpr double kXiBranchTolerance = 1e-8;

struct EgpParams {
  double sigma = 1.0;  // scale, > 0
  double xi = 0.0;     // upper-tail shape
  double kappa = 1.0;  // lower-tail shape, > 0

  void validate() const;
  /// Upper end of the support (+inf when xi >= 0).
  double upper_bound() const;
};

/// Quantile level and linear predictor of the median-type link q_alpha = exp(eta).
struct MedianLink {
  double alpha = 0.5;
  double eta = 0.0;
};

struct TruncPoissonParams {
  double lambda = 1.0;
};

enum class KappaPriorForm { Exact, Approximate };

/// What pc_prior_xi does outside (xi_low, xi_high).
enum class OutOfBounds { ReturnZero, Throw };

struct PcPriorConfig {
  double rate = 10.0;
  double xi_low = -0.5;
  double xi_high = 0.5;
  KappaPriorForm kappa_form = KappaPriorForm::Approximate;

  void validate() const;
};

enum class AltFamily { Gamma, Weibull };

/// Gamma / Weibull alternatives to eGP. The scale follows from eta so that the
/// median equals exp(eta).
struct AltLikelihoodParams {
  AltFamily family = AltFamily::Gamma;
  double shape = 1.0;

  /// Scale parameter implied by the median link.
  double scale_from_eta(double eta) const;
};

/// Log-likelihood of one observation together with its first two derivatives
/// with respect to the linear predictor.
struct LogLikEta {
  double value = 0.0;
  double grad = 0.0;
  double hess = 0.0;
};

// ---- extended generalised Pareto -------------------------------------------

double egp_cdf(double y, const EgpParams& p);
double egp_pdf(double y, const EgpParams& p);
double egp_log_pdf(double y, const EgpParams& p);
double egp_quantile(double u, const EgpParams& p);
std::vector<double> egp_sample(std::size_t n, const EgpParams& p, std::uint64_t seed);

/// Standard GPD cdf 1-(1+xi*y/sigma)^(-1/xi); the kappa = 1 member of the family.
double gpd_cdf(double y, double sigma, double xi);

/// sigma such that the alpha-quantile of eGP(sigma, xi, kappa) is exp(eta).
double egp_sigma_from_eta(const MedianLink& link, double xi, double kappa);

/// log eGP density of y with sigma = egp_sigma_from_eta(eta). Returns -inf
/// (zero derivatives) when y lies beyond a finite upper support bound.
LogLikEta egp_loglik_eta(double y, double eta, double xi, double kappa, double alpha = 0.5);

// ---- hurdle count and presence ---------------------------------------------

double trunc_poisson_pmf(long long y, const TruncPoissonParams& p);
double trunc_poisson_log_pmf(long long y, double lambda);
/// Draw from the zero-truncated Poisson (inversion on the truncated cdf).
long long trunc_poisson_draw(double lambda, std::mt19937_64& rng);
LogLikEta trunc_poisson_loglik_eta(long long y, double eta);

LogLikEta bernoulli_loglik_eta(int z, double eta);

LogLikEta alt_loglik_eta(double y, double eta, const AltLikelihoodParams& params);
double alt_quantile(double u, double eta, const AltLikelihoodParams& params);

/// Gaussian observation with precision `precision` and mean eta.
LogLikEta gaussian_loglik_eta(double y, double eta, double precision);

// ---- KLD and PC priors -----------------------------------------------------

/// KLD between GPD(xi) and its exponential base model, xi in [0, 1).
double kld_gpd_xi(double xi);
/// KLD between eGP(kappa) and eGP(kappa = 1); does not depend on sigma or xi.
double kld_egp_kappa(double kappa);

double pc_prior_xi(double xi, const PcPriorConfig& cfg,
                   OutOfBounds mode = OutOfBounds::ReturnZero);
double pc_prior_kappa(double kappa, const PcPriorConfig& cfg);
double pc_prior_kappa_exact(double kappa, double rate);
double pc_prior_kappa_approx(double kappa, double rate);

// ---- shared helpers --------------------------------------------------------

/// Uniform double in (0, 1) from 53 random bits; never returns 0 or 1.
double uniform_open(std::mt19937_64& rng);

double inv_logit(double x);
double log1p_exp(double x);

}  // namespace firecast::dist
