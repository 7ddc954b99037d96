#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/latent.hpp"

namespace firecast::latent {

namespace {

// Upper bound on the Poisson rate handed to the sampler.
constexpr double kMaxLambda = 1e9;

std::size_t pick_point(const Fit& fit, std::mt19937_64& rng) {
  const double u = dist::uniform_open(rng);
  double c = 0.0;
  for (std::size_t k = 0; k < fit.points.size(); ++k) {
    c += fit.points[k].weight;
    if (u < c) return k;
  }
  return fit.points.size() - 1;
}

double predictor(const LatentModel& m, const LinearPredictor& lp, const Eigen::VectorXd& theta,
                 const Eigen::VectorXd& u) {
  double eta = 0.0;
  for (const auto& e : lp.entries) eta += m.entry_value(e, theta) * u[e.col];
  return eta;
}

void check_fit(const LatentModel& model, const Fit& fit) {
  if (fit.points.empty()) throw DomainError("posterior predictive: fit has no integration points");
  for (const auto& p : fit.points) {
    if (p.mode.size() != model.dim()) throw DimensionError("posterior predictive: fit does not match the model");
    if (!p.approx.ready()) throw DomainError("posterior predictive: integration point without factorisation");
  }
}

}  // namespace

Eigen::MatrixXd sample_linear_predictors(const LatentModel& model, const Fit& fit,
                                         const std::vector<LinearPredictor>& rows, int n_samples,
                                         std::uint64_t seed) {
  if (n_samples < 1) throw ParameterError("posterior predictive: n_samples must be positive");
  check_fit(model, fit);
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), n_samples);
  for (int s = 0; s < n_samples; ++s) {
    const auto& p = fit.points[pick_point(fit, rng)];
    const Eigen::VectorXd u = p.mode + p.approx.sample(rng);
    for (std::size_t r = 0; r < rows.size(); ++r) out(r, s) = predictor(model, rows[r], p.theta, u);
  }
  return out;
}

PredictiveDraws posterior_predictive(const LatentModel& model, const Fit& fit,
                                     const std::vector<PredictiveCell>& cells, int n_samples,
                                     std::uint64_t seed) {
  if (n_samples < 1) throw ParameterError("posterior predictive: n_samples must be positive");
  check_fit(model, fit);
  const std::size_t n = cells.size();
  PredictiveDraws out;
  out.z.assign(n, std::vector<std::uint8_t>(n_samples));
  out.count.assign(n, std::vector<double>(n_samples));
  out.area.assign(n, std::vector<double>(n_samples));
  out.failures.assign(n, 0);

  std::mt19937_64 rng(seed);
  for (int s = 0; s < n_samples; ++s) {
    const auto& p = fit.points[pick_point(fit, rng)];
    const Eigen::VectorXd u = p.mode + p.approx.sample(rng);
    const Eigen::VectorXd& th = p.theta;
    for (std::size_t i = 0; i < n; ++i) {
      const double ez = predictor(model, cells[i].z, th, u);
      const double ec = predictor(model, cells[i].c, th, u);
      const double eb = predictor(model, cells[i].b, th, u);
      out.z[i][s] = dist::uniform_open(rng) < dist::inv_logit(ez) ? 1 : 0;

      double lambda = std::exp(ec);
      if (!(lambda <= kMaxLambda)) {
        lambda = kMaxLambda;
        ++out.failures[i];
      }
      out.count[i][s] = static_cast<double>(dist::trunc_poisson_draw(lambda, rng));

      const double v = dist::uniform_open(rng);
      double root = 0.0;
      if (model.area_lik == LikKind::EGP) {
        const double xi = th[model.xi_slot], kappa = th[model.kappa_slot];
        const double sigma = dist::egp_sigma_from_eta({model.alpha, eb}, xi, kappa);
        if (std::isfinite(sigma) && sigma > 0.0) {
          root = dist::egp_quantile(v, {sigma, xi, kappa});
        } else {
          ++out.failures[i];
        }
      } else {
        const auto fam = model.area_lik == LikKind::Gamma ? dist::AltFamily::Gamma : dist::AltFamily::Weibull;
        root = dist::alt_quantile(v, eb, {fam, th[model.shape_slot]});
      }
      if (!std::isfinite(root)) {
        root = std::sqrt(std::numeric_limits<double>::max());
        ++out.failures[i];
      }
      out.area[i][s] = root * root;
    }
  }
  return out;
}

Eigen::VectorXd sample_prior(const LatentModel& model, const Eigen::VectorXd& theta, std::mt19937_64& rng) {
  GaussianApprox g;
  g.factorize(model.precision(theta), model.constraints());
  return g.sample(rng);
}

}  // namespace firecast::latent
