#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/latent.hpp"

namespace firecast::latent {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
}  // namespace

PosteriorObjective::PosteriorObjective(const LatentModel& model, LaplaceOptions opt)
    : model_(model), engine_(std::make_unique<LaplaceEngine>(model)), opt_(opt), base_(model.initial_theta()) {}

Eigen::VectorXd PosteriorObjective::theta(const Eigen::VectorXd& internal) const {
  return model_.from_internal(internal, base_);
}

double PosteriorObjective::operator()(const Eigen::VectorXd& internal) {
  ++n_eval_;
  const Eigen::VectorXd th = theta(internal);
  const double lp = model_.log_prior_internal(th);
  if (!std::isfinite(lp)) return kNegInf;
  last_ = engine_->fit(th, warm_.size() ? &warm_ : nullptr, opt_, false);
  if (!std::isfinite(last_.log_marginal)) return kNegInf;
  warm_ = last_.mode;
  return last_.log_marginal + lp;
}

namespace {

Eigen::VectorXd fd_gradient(PosteriorObjective& obj, const Eigen::VectorXd& x, double fx, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x;
    xp[j] += h;
    double fp = obj(xp);
    if (std::isfinite(fp)) {
      g[j] = (fp - fx) / h;
    } else {
      xp[j] = x[j] - h;
      const double fm = obj(xp);
      g[j] = std::isfinite(fm) ? (fx - fm) / h : 0.0;
    }
  }
  return g;
}

}  // namespace

ModeSearch find_mode(const LatentModel& model, const GridConfig& cfg, PosteriorObjective& obj) {
  ModeSearch out;
  Eigen::VectorXd x = model.to_internal(model.initial_theta());
  const Eigen::Index d = x.size();
  double f = obj(x);
  if (!std::isfinite(f)) throw ConvergenceError("mode search: posterior is zero at the initial hyperparameters");
  out.internal = x;
  out.log_post = f;
  out.latent = obj.last().mode;
  if (d == 0) {
    out.converged = true;
    out.evaluations = obj.evaluations();
    return out;
  }
  Eigen::VectorXd warm_at_x = obj.last().mode;

  // maximise f with BFGS on the inverse Hessian of -f
  Eigen::VectorXd g = fd_gradient(obj, x, f, cfg.fd_step);
  obj.set_warm(warm_at_x);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d);
  bool scaled = false;
  int small_steps = 0;
  for (out.iterations = 0; out.iterations < cfg.max_bfgs_iter; ++out.iterations) {
    if (g.lpNorm<Eigen::Infinity>() < cfg.bfgs_grad_tol) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd p = H * g;  // ascent direction
    const double pmax = p.lpNorm<Eigen::Infinity>();
    if (pmax > 2.0) p *= 2.0 / pmax;
    double slope = g.dot(p);
    if (slope <= 0.0) {  // lost positive definiteness: restart along the gradient
      H.setIdentity();
      p = g;
      if (g.lpNorm<Eigen::Infinity>() > 2.0) p *= 2.0 / g.lpNorm<Eigen::Infinity>();
      slope = g.dot(p);
    }
    double t = 1.0, f_new = kNegInf;
    Eigen::VectorXd x_new;
    for (int k = 0; k < 30; ++k, t *= 0.5) {
      x_new = x + t * p;
      f_new = obj(x_new);
      if (std::isfinite(f_new) && f_new >= f + 1e-4 * t * slope) break;
    }
    if (!(std::isfinite(f_new) && f_new >= f + 1e-4 * t * slope)) break;
    warm_at_x = obj.last().mode;
    const Eigen::VectorXd g_new = fd_gradient(obj, x_new, f_new, cfg.fd_step);
    obj.set_warm(warm_at_x);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g - g_new;  // gradient change of -f
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      if (!scaled) {
        H *= sy / y.dot(y);
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    const double df = f_new - f;
    x = x_new;
    f = f_new;
    g = g_new;
    small_steps = df < cfg.bfgs_f_tol ? small_steps + 1 : 0;
    if (small_steps >= 2 || (df < 1e-9 * (1.0 + std::abs(f)) && s.lpNorm<Eigen::Infinity>() < 1e-6)) {
      out.converged = true;
      ++out.iterations;
      break;
    }
  }
  out.internal = x;
  out.log_post = f;
  out.latent = warm_at_x;
  out.evaluations = obj.evaluations();
  return out;
}

Fit hyper_grid(const LatentModel& model, const GridConfig& cfg) {
  if (!(cfg.step_sigma > 0.0)) throw ConfigError("grid: step_sigma must be positive");
  if (!(cfg.fd_step > 0.0)) throw ConfigError("grid: fd_step must be positive");
  PosteriorObjective obj(model, cfg.laplace);
  Fit fit;
  fit.mode = find_mode(model, cfg, obj);
  const Eigen::VectorXd& xm = fit.mode.internal;
  const Eigen::Index d = xm.size();

  // curvature from central second differences along each axis
  fit.sigma = Eigen::VectorXd::Ones(d);
  if (cfg.strategy != GridStrategy::ModeOnly) {
    const double h = 10.0 * cfg.fd_step;
    const double f0 = obj(xm);
    const Eigen::VectorXd warm = obj.last().mode;
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::VectorXd xp = xm, xn = xm;
      xp[j] += h;
      xn[j] -= h;
      obj.set_warm(warm);
      const double fp = obj(xp);
      obj.set_warm(warm);
      const double fn = obj(xn);
      const double curv = (fp - 2.0 * f0 + fn) / (h * h);
      if (std::isfinite(curv) && curv < 0.0) fit.sigma[j] = 1.0 / std::sqrt(-curv);
    }
  }

  std::vector<Eigen::VectorXd> design;
  design.push_back(xm);
  if (cfg.strategy == GridStrategy::Axial) {
    for (Eigen::Index j = 0; j < d; ++j)
      for (double z : cfg.axial_levels) {
        Eigen::VectorXd x = xm;
        x[j] += z * cfg.step_sigma * fit.sigma[j];
        design.push_back(x);
      }
  } else if (cfg.strategy == GridStrategy::CCD) {
    if (d > 8) throw ConfigError("grid: central composite design supports at most 8 free hyperparameters");
    const double f0 = std::sqrt(static_cast<double>(d));
    for (Eigen::Index j = 0; j < d; ++j)
      for (double sgn : {-1.0, 1.0}) {
        Eigen::VectorXd x = xm;
        x[j] += sgn * f0 * cfg.step_sigma * fit.sigma[j];
        design.push_back(x);
      }
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
      Eigen::VectorXd x = xm;
      for (Eigen::Index j = 0; j < d; ++j)
        x[j] += (((mask >> j) & 1u) ? 1.0 : -1.0) * cfg.step_sigma * fit.sigma[j];
      design.push_back(x);
    }
  }

  LaplaceEngine& engine = obj.engine();
  const Eigen::VectorXd base = model.initial_theta();
  double best = kNegInf;
  for (const auto& x : design) {
    HyperPoint p;
    p.internal = x;
    p.theta = model.from_internal(x, base);
    p.log_prior = model.log_prior_internal(p.theta);
    if (!std::isfinite(p.log_prior)) continue;
    LaplaceResult r = engine.fit(p.theta, &fit.mode.latent, cfg.laplace, true);
    if (!std::isfinite(r.log_marginal)) continue;
    p.log_marginal = r.log_marginal;
    p.log_post = p.log_marginal + p.log_prior;
    p.mode = std::move(r.mode);
    p.approx = std::move(r.approx);
    best = std::max(best, p.log_post);
    fit.points.push_back(std::move(p));
  }
  if (fit.points.empty()) throw ConvergenceError("grid: no integration point has positive posterior density");
  std::erase_if(fit.points, [&](const HyperPoint& p) { return p.log_post < best - cfg.prune; });
  double total = 0.0;
  for (auto& p : fit.points) total += (p.weight = std::exp(p.log_post - best));
  for (auto& p : fit.points) p.weight /= total;
  return fit;
}

GaussianApprox rebuild_approx(const LatentModel& model, const Eigen::VectorXd& theta, const Eigen::VectorXd& mode) {
  LaplaceEngine engine(model);
  return engine.approx_at(theta, mode);
}

double MixtureMarginal::mean_value() const {
  double s = 0.0;
  for (std::size_t k = 0; k < weight.size(); ++k) s += weight[k] * mean[k];
  return s;
}

double MixtureMarginal::cdf(double x) const {
  double s = 0.0;
  for (std::size_t k = 0; k < weight.size(); ++k) s += weight[k] * normal_cdf((x - mean[k]) / sd[k]);
  return s;
}

double MixtureMarginal::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("mixture quantile: level must lie in (0, 1)");
  if (weight.empty()) throw DomainError("mixture quantile: empty mixture");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < weight.size(); ++k) {
    lo = std::min(lo, mean[k] - 40.0 * sd[k]);
    hi = std::max(hi, mean[k] + 40.0 * sd[k]);
  }
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve([&](double x) { return cdf(x) - p; }, lo, hi,
                                                   boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

MixtureMarginal latent_marginal(const Fit& fit, int index) {
  MixtureMarginal m;
  for (const auto& p : fit.points) {
    if (index < 0 || index >= p.mode.size()) throw DimensionError("latent marginal: index out of range");
    m.weight.push_back(p.weight);
    m.mean.push_back(p.mode[index]);
    m.sd.push_back(std::sqrt(std::max(p.approx.variance(index), 0.0)));
  }
  return m;
}

Eigen::VectorXd hyper_posterior_mean(const Fit& fit) {
  if (fit.points.empty()) throw DomainError("hyperparameter mean: empty fit");
  Eigen::VectorXd m = Eigen::VectorXd::Zero(fit.points.front().theta.size());
  for (const auto& p : fit.points) m += p.weight * p.theta;
  return m;
}

}  // namespace firecast::latent
