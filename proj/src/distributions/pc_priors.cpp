#include <cmath>
#include <string>

#include "firecast/distributions.hpp"
#include "firecast/errors.hpp"

namespace firecast::dist {

void PcPriorConfig::validate() const {
  if (!(rate > 0.0)) throw ParameterError("PC prior: rate must be positive");
  if (!(xi_low < 0.0 && xi_high > 0.0))
    throw ParameterError("PC prior: xi bounds must straddle zero");
}

double kld_gpd_xi(double xi) {
  if (!(xi >= 0.0 && xi < 1.0)) throw DomainError("GPD KLD: xi must lie in [0, 1)");
  return xi * xi / (1.0 - xi);
}

double kld_egp_kappa(double kappa) {
  if (!(kappa > 0.0)) throw DomainError("eGP KLD: kappa must be positive");
  const double t = kappa - 1.0;
  if (std::abs(t) < 0.1) {
    // sum_{n>=2} (-1)^n (n-1)/n t^n, avoids cancellation near the base model
    double sum = 0.0;
    double tn = t;
    for (int n = 2; n <= 40; ++n) {
      tn *= t;
      const double term = (n - 1.0) / n * tn;
      sum += (n % 2 == 0) ? term : -term;
    }
    return sum;
  }
  return std::log(kappa) - t / kappa;
}

double pc_prior_xi(double xi, const PcPriorConfig& cfg, OutOfBounds mode) {
  cfg.validate();
  if (!(xi > cfg.xi_low && xi < cfg.xi_high)) {
    if (mode == OutOfBounds::Throw)
      throw DomainError("PC prior for xi: " + std::to_string(xi) + " outside bounds");
    return 0.0;
  }
  const double lam = cfg.rate;
  const double mass = -std::expm1(lam * cfg.xi_low) - std::expm1(-lam * cfg.xi_high);
  return lam * std::exp(-lam * std::abs(xi)) / mass;
}

double pc_prior_kappa_exact(double kappa, double rate) {
  if (!(kappa > 0.0)) throw DomainError("PC prior for kappa: kappa must be positive");
  if (!(rate > 0.0)) throw ParameterError("PC prior: rate must be positive");
  if (kappa == 1.0) return rate / 2.0;
  const double dist = std::sqrt(2.0 * kld_egp_kappa(kappa));
  if (!(dist > 0.0)) return rate / 2.0;
  const double jac = std::abs(kappa - 1.0) / (kappa * kappa * dist);
  return 0.5 * rate * jac * std::exp(-rate * dist);
}

double pc_prior_kappa_approx(double kappa, double rate) {
  if (!(kappa > 0.0)) throw DomainError("PC prior for kappa: kappa must be positive");
  if (!(rate > 0.0)) throw ParameterError("PC prior: rate must be positive");
  return rate * std::exp(-rate * std::abs(kappa - 1.0)) / (2.0 - std::exp(-rate));
}

double pc_prior_kappa(double kappa, const PcPriorConfig& cfg) {
  cfg.validate();
  return cfg.kappa_form == KappaPriorForm::Exact ? pc_prior_kappa_exact(kappa, cfg.rate)
                                                 : pc_prior_kappa_approx(kappa, cfg.rate);
}

}  // namespace firecast::dist
