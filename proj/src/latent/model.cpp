#include <cmath>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/latent.hpp"

namespace firecast::latent {

int LatentModel::add_hyper(HyperParam h) {
  if (hyper_index(h.name) >= 0) throw ConfigError("duplicate hyperparameter '" + h.name + "'");
  hypers_.push_back(std::move(h));
  return static_cast<int>(hypers_.size()) - 1;
}

int LatentModel::add_block(Block b) {
  if (block_index(b.name) >= 0) throw ConfigError("duplicate latent block '" + b.name + "'");
  if (b.base_dim < 1 || b.n_groups < 1) throw ParameterError("block '" + b.name + "': empty dimension");
  if (b.kind == BlockKind::BYM2) {
    if (!b.icar) throw ParameterError("block '" + b.name + "': BYM2 needs a scaled ICAR structure");
    if (static_cast<int>(b.icar->n()) != b.base_dim)
      throw DimensionError("block '" + b.name + "': graph size differs from base dimension");
  }
  b.offset = dim_;
  dim_ += b.dim();
  blocks_.push_back(std::move(b));
  constraints_ready_ = false;
  return static_cast<int>(blocks_.size()) - 1;
}

void LatentModel::add_observation(Observation o) { obs_.push_back(std::move(o)); }

int LatentModel::block_index(const std::string& name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].name == name) return static_cast<int>(i);
  return -1;
}

int LatentModel::hyper_index(const std::string& name) const {
  for (std::size_t i = 0; i < hypers_.size(); ++i)
    if (hypers_[i].name == name) return static_cast<int>(i);
  return -1;
}

const SpMat& LatentModel::constraints() const {
  if (constraints_ready_) return constraints_;
  std::vector<Eigen::Triplet<double>> t;
  int row = 0;
  for (const auto& b : blocks_) {
    for (int g = 0; g < b.n_groups; ++g) {
      const int base = b.offset + g * b.per_group();
      if (b.kind == BlockKind::RW1) {
        for (int i = 0; i < b.base_dim; ++i) t.emplace_back(row, base + i, 1.0);
        ++row;
      } else if (b.kind == BlockKind::BYM2) {
        const auto& C = b.icar->constraints;
        for (Eigen::Index r = 0; r < C.rows(); ++r, ++row)
          for (int i = 0; i < b.base_dim; ++i)
            if (C(r, i) != 0.0) t.emplace_back(row, base + b.base_dim + i, C(r, i));
      }
    }
  }
  constraints_.resize(row, dim_);
  constraints_.setFromTriplets(t.begin(), t.end());
  constraints_ready_ = true;
  return constraints_;
}

void LatentModel::precision_triplets(const Eigen::VectorXd& theta,
                                     std::vector<Eigen::Triplet<double>>& t) const {
  t.clear();
  for (const auto& b : blocks_) {
    const double tau = b.tau_slot >= 0 ? theta[b.tau_slot] : 1.0;
    for (int g = 0; g < b.n_groups; ++g) {
      const int base = b.offset + g * b.per_group();
      switch (b.kind) {
        case BlockKind::Intercept:
          t.emplace_back(base, base, b.fixed_precision);
          break;
        case BlockKind::IID:
          for (int i = 0; i < b.base_dim; ++i) t.emplace_back(base + i, base + i, tau);
          break;
        case BlockKind::RW1:
          for (int i = 0; i + 1 < b.base_dim; ++i) {
            t.emplace_back(base + i, base + i, tau);
            t.emplace_back(base + i + 1, base + i + 1, tau);
            t.emplace_back(base + i, base + i + 1, -tau);
            t.emplace_back(base + i + 1, base + i, -tau);
          }
          break;
        case BlockKind::BYM2: {
          // joint precision of (b, delta): [[a I, c I], [c I, R + d I]]
          const double phi = theta[b.phi_slot];
          const double a = tau / (1.0 - phi);
          const double c = -std::sqrt(phi * tau) / (1.0 - phi);
          const double d = phi / (1.0 - phi);
          const int n = b.base_dim;
          for (int i = 0; i < n; ++i) {
            t.emplace_back(base + i, base + i, a);
            t.emplace_back(base + i, base + n + i, c);
            t.emplace_back(base + n + i, base + i, c);
            t.emplace_back(base + n + i, base + n + i, d);
          }
          const SpMat& R = b.icar->R;
          for (int k = 0; k < R.outerSize(); ++k)
            for (SpMat::InnerIterator it(R, k); it; ++it)
              t.emplace_back(base + n + static_cast<int>(it.row()), base + n + static_cast<int>(it.col()),
                             it.value());
          break;
        }
      }
    }
  }
}

SpMat LatentModel::precision(const Eigen::VectorXd& theta) const {
  std::vector<Eigen::Triplet<double>> t;
  precision_triplets(theta, t);
  SpMat Q(dim_, dim_);
  Q.setFromTriplets(t.begin(), t.end());
  return Q;
}

SpMat LatentModel::design(const std::vector<Observation>& rows, const Eigen::VectorXd& theta) const {
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& e : rows[i].entries) t.emplace_back(i, e.col, entry_value(e, theta));
  SpMat A(static_cast<Eigen::Index>(rows.size()), dim_);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

SpMat LatentModel::design(const std::vector<LinearPredictor>& rows, const Eigen::VectorXd& theta) const {
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& e : rows[i].entries) t.emplace_back(i, e.col, entry_value(e, theta));
  SpMat A(static_cast<Eigen::Index>(rows.size()), dim_);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

dist::LogLikEta LatentModel::loglik(const Observation& o, double eta, const Eigen::VectorXd& theta) const {
  switch (o.lik) {
    case LikKind::Bernoulli: return dist::bernoulli_loglik_eta(o.y != 0.0 ? 1 : 0, eta);
    case LikKind::TruncPoisson: return dist::trunc_poisson_loglik_eta(std::llround(o.y), eta);
    case LikKind::EGP: return dist::egp_loglik_eta(o.y, eta, theta[xi_slot], theta[kappa_slot], alpha);
    case LikKind::Gamma:
      return dist::alt_loglik_eta(o.y, eta, {dist::AltFamily::Gamma, theta[shape_slot]});
    case LikKind::Weibull:
      return dist::alt_loglik_eta(o.y, eta, {dist::AltFamily::Weibull, theta[shape_slot]});
    case LikKind::Gaussian: return dist::gaussian_loglik_eta(o.y, eta, o.gauss_precision);
  }
  return {};
}

Eigen::VectorXd LatentModel::initial_theta() const {
  Eigen::VectorXd th(hypers_.size());
  for (std::size_t i = 0; i < hypers_.size(); ++i) th[i] = hypers_[i].initial;
  return th;
}

std::vector<int> LatentModel::free_hypers() const {
  std::vector<int> f;
  for (std::size_t i = 0; i < hypers_.size(); ++i)
    if (!hypers_[i].fixed) f.push_back(static_cast<int>(i));
  return f;
}

Eigen::VectorXd LatentModel::to_internal(const Eigen::VectorXd& theta) const {
  const auto f = free_hypers();
  Eigen::VectorXd x(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) x[k] = hypers_[f[k]].transform.to_internal(theta[f[k]]);
  return x;
}

Eigen::VectorXd LatentModel::from_internal(const Eigen::VectorXd& x, const Eigen::VectorXd& base) const {
  const auto f = free_hypers();
  if (static_cast<std::size_t>(x.size()) != f.size()) throw DimensionError("internal hyperparameter size");
  Eigen::VectorXd th = base;
  for (std::size_t k = 0; k < f.size(); ++k) th[f[k]] = hypers_[f[k]].transform.to_natural(x[k]);
  return th;
}

double LatentModel::log_prior_internal(const Eigen::VectorXd& theta) const {
  double s = 0.0;
  for (int i : free_hypers()) {
    const auto& h = hypers_[i];
    s += h.prior.log_density(theta[i]) + h.transform.log_jacobian(h.transform.to_internal(theta[i]));
  }
  return s;
}

void LatentModel::validate() const {
  const int nh = static_cast<int>(hypers_.size());
  auto check_slot = [&](int s, const std::string& what) {
    if (s < -1 || s >= nh) throw ConfigError(what + ": hyperparameter slot out of range");
  };
  for (const auto& b : blocks_) {
    check_slot(b.tau_slot, b.name);
    check_slot(b.phi_slot, b.name);
    if ((b.kind == BlockKind::IID || b.kind == BlockKind::RW1 || b.kind == BlockKind::BYM2) && b.tau_slot < 0)
      throw ConfigError("block '" + b.name + "' needs a precision hyperparameter");
    if (b.kind == BlockKind::BYM2 && b.phi_slot < 0)
      throw ConfigError("block '" + b.name + "' needs a mixing hyperparameter");
  }
  bool egp = false, alt = false;
  for (const auto& o : obs_) {
    for (const auto& e : o.entries) {
      if (e.col < 0 || e.col >= dim_) throw DimensionError("observation references latent index out of range");
      check_slot(e.scale_slot, "design entry");
    }
    egp |= o.lik == LikKind::EGP;
    alt |= o.lik == LikKind::Gamma || o.lik == LikKind::Weibull;
  }
  if (egp && (xi_slot < 0 || kappa_slot < 0 || xi_slot >= nh || kappa_slot >= nh))
    throw ConfigError("eGP observations need xi and kappa hyperparameters");
  if (alt && (shape_slot < 0 || shape_slot >= nh))
    throw ConfigError("gamma/Weibull observations need a shape hyperparameter");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("median link level must lie in (0, 1)");
}

}  // namespace firecast::latent
