#include <cmath>
#include <string>

#include "firecast/boosting.hpp"
#include "firecast/errors.hpp"

namespace firecast::gbm {

void LossSpec::validate() const {
  if (loss == Loss::Tweedie && !(tweedie_power > 1.0 && tweedie_power < 2.0))
    throw ParameterError("Tweedie power must lie in (1, 2), got " + std::to_string(tweedie_power));
}

void LossSpec::check_target(double y) const {
  if (!std::isfinite(y)) throw DomainError("boosting: non-finite target");
  switch (loss) {
    case Loss::Poisson:
      if (y < 0.0 || y != std::floor(y))
        throw DomainError("Poisson loss: target must be a non-negative integer, got " + std::to_string(y));
      break;
    case Loss::Tweedie:
      if (y < 0.0) throw DomainError("Tweedie loss: target must be non-negative");
      break;
    case Loss::SquaredError:
      break;
  }
}

GradHess LossSpec::grad_hess(double y, double raw) const {
  switch (loss) {
    case Loss::Poisson: {
      const double mu = std::exp(raw);
      return {mu - y, mu};
    }
    case Loss::Tweedie: {
      const double k = tweedie_power;
      const double a = std::exp((1.0 - k) * raw);
      const double b = std::exp((2.0 - k) * raw);
      return {-y * a + b, -(1.0 - k) * y * a + (2.0 - k) * b};
    }
    case Loss::SquaredError:
      return {raw - y, 1.0};
  }
  return {0.0, 0.0};
}

double LossSpec::inverse_link(double raw) const {
  return loss == Loss::SquaredError ? raw : std::exp(raw);
}

double LossSpec::link(double mean) const {
  return loss == Loss::SquaredError ? mean : std::log(mean);
}

double LossSpec::mean_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& pred) const {
  if (y.size() != pred.size()) throw DimensionError("deviance: length mismatch");
  if (y.size() == 0) throw DomainError("deviance: no rows");
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    switch (loss) {
      case Loss::Poisson: s += poisson_deviance(y(i), pred(i)); break;
      case Loss::Tweedie: s += tweedie_deviance(y(i), pred(i), tweedie_power); break;
      case Loss::SquaredError: s += (y(i) - pred(i)) * (y(i) - pred(i)); break;
    }
  }
  return s / static_cast<double>(y.size());
}

GradHess loss_grad_hess(double y, double raw, const LossSpec& spec) {
  spec.validate();
  spec.check_target(y);
  return spec.grad_hess(y, raw);
}

double poisson_deviance(double y, double mu) {
  if (y < 0.0) throw DomainError("Poisson deviance: y must be non-negative");
  if (!(mu > 0.0)) throw DomainError("Poisson deviance: prediction must be positive");
  const double t = y > 0.0 ? y * std::log(y / mu) : 0.0;
  return 2.0 * (t - (y - mu));
}

double tweedie_deviance(double y, double mu, double k) {
  if (y < 0.0) throw DomainError("Tweedie deviance: y must be non-negative");
  if (!(mu > 0.0)) throw DomainError("Tweedie deviance: prediction must be positive");
  if (!(k > 1.0 && k < 2.0)) throw ParameterError("Tweedie deviance: power must lie in (1, 2)");
  const double d = 2.0 * (std::pow(y, 2.0 - k) / ((1.0 - k) * (2.0 - k)) -
                          y * std::pow(mu, 1.0 - k) / (1.0 - k) + std::pow(mu, 2.0 - k) / (2.0 - k));
  return std::max(d, 0.0);
}

}  // namespace firecast::gbm
