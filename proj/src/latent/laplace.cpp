#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/latent.hpp"

namespace firecast::latent {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_det_dense(const Eigen::LDLT<Eigen::MatrixXd>& f) {
  double s = 0.0;
  const auto d = f.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i) s += std::log(d[i]);
  return s;
}

double log_det_llt(const SparseLLT& llt) {
  const SpMat L = llt.matrixL();
  double s = 0.0;
  for (Eigen::Index k = 0; k < L.outerSize(); ++k) {
    // column-major lower factor: the diagonal is the first stored entry of each column
    SpMat::InnerIterator it(L, k);
    s += std::log(it.value());
  }
  return 2.0 * s;
}

// Lower-triangular storage with a fixed pattern and cached value offsets.
struct Pattern {
  SpMat mat;
  std::vector<int> diag;

  void build(int n, const std::vector<std::pair<int, int>>& positions) {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(positions.size() + n);
    for (auto [r, c] : positions) {
      if (r < c) std::swap(r, c);
      t.emplace_back(r, c, 0.0);
    }
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, 0.0);
    mat.resize(n, n);
    mat.setFromTriplets(t.begin(), t.end());
    mat.makeCompressed();
    diag.resize(n);
    for (int i = 0; i < n; ++i) diag[i] = pos(i, i);
  }

  int pos(int r, int c) const {
    if (r < c) std::swap(r, c);
    const int* inner = mat.innerIndexPtr();
    const int b = mat.outerIndexPtr()[c], e = mat.outerIndexPtr()[c + 1];
    const int* it = std::lower_bound(inner + b, inner + e, r);
    if (it == inner + e || *it != r) throw DimensionError("sparse pattern: missing position");
    return static_cast<int>(it - inner);
  }
};

}  // namespace

double standard_normal(std::mt19937_64& rng) {
  const double u1 = dist::uniform_open(rng);
  const double u2 = dist::uniform_open(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ------------------------------------------------------------ GaussianApprox

void GaussianApprox::adopt(std::shared_ptr<SparseLLT> llt, const SpMat& C) {
  llt_ = std::move(llt);
  c_ = C;
  dim_ = static_cast<int>(llt_->rows());
  log_det_ = log_det_llt(*llt_);
  if (C.rows() > 0) {
    const Eigen::MatrixXd ct = Eigen::MatrixXd(C.transpose());
    pinv_ct_ = llt_->solve(ct);
    const Eigen::MatrixXd S = C * pinv_ct_;
    schur_.compute(S);
    const Eigen::MatrixXd cct = Eigen::MatrixXd(C * C.transpose());
    log_det_ += log_det_dense(schur_) - log_det_dense(Eigen::LDLT<Eigen::MatrixXd>(cct));
  } else {
    pinv_ct_.resize(dim_, 0);
  }
}

void GaussianApprox::factorize(const SpMat& P, const SpMat& C) {
  if (P.rows() != P.cols() || (C.rows() > 0 && C.cols() != P.rows()))
    throw DimensionError("gaussian approximation: shape mismatch");
  SpMat Pt = P;
  if (C.rows() > 0) Pt += SpMat(C.transpose() * C);
  const SpMat lower = Pt.triangularView<Eigen::Lower>();
  auto llt = std::make_shared<SparseLLT>();
  llt->compute(lower);
  if (llt->info() != Eigen::Success) throw ConvergenceError("gaussian approximation: precision not positive definite");
  adopt(std::move(llt), C);
}

Eigen::VectorXd GaussianApprox::constrained_solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd x = llt_->solve(b);
  if (c_.rows() > 0) x -= pinv_ct_ * schur_.solve(c_ * x);
  return x;
}

Eigen::VectorXd GaussianApprox::sample(std::mt19937_64& rng) const {
  Eigen::VectorXd z(dim_);
  for (int i = 0; i < dim_; ++i) z[i] = standard_normal(rng);
  Eigen::VectorXd x = llt_->permutationPinv() * Eigen::VectorXd(llt_->matrixU().solve(z));
  if (c_.rows() > 0) x -= pinv_ct_ * schur_.solve(c_ * x);
  return x;
}

double GaussianApprox::variance(int i) const {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(dim_);
  e[i] = 1.0;
  const Eigen::VectorXd x = llt_->solve(e);
  double v = x[i];
  if (c_.rows() > 0) {
    const Eigen::VectorXd r = pinv_ct_.row(i).transpose();
    v -= r.dot(schur_.solve(r));
  }
  return v;
}

Eigen::VectorXd GaussianApprox::variances(const SpMat& A) const {
  Eigen::VectorXd out(A.rows());
  const SpMat At = A.transpose();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const Eigen::VectorXd a = Eigen::VectorXd(At.col(i));
    double v = a.dot(llt_->solve(a));
    if (c_.rows() > 0) {
      const Eigen::VectorXd r = pinv_ct_.transpose() * a;
      v -= r.dot(schur_.solve(r));
    }
    out[i] = v;
  }
  return out;
}

Eigen::VectorXd project_constraints(const SpMat& C, const Eigen::VectorXd& u) {
  if (C.rows() == 0) return u;
  const Eigen::MatrixXd cct = Eigen::MatrixXd(C * C.transpose());
  const Eigen::VectorXd lam = cct.ldlt().solve(C * u);
  return u - C.transpose() * lam;
}

double constrained_log_det(const SpMat& Q, const SpMat& C) {
  GaussianApprox g;
  g.factorize(Q, C);
  return g.log_det();
}

// ------------------------------------------------------------ LaplaceEngine

struct LaplaceEngine::Impl {
  const LatentModel& m;
  SpMat C;
  Eigen::LDLT<Eigen::MatrixXd> cct;
  double log_det_cct = 0.0;
  int n = 0;

  Pattern post;
  std::vector<int> post_q;   // value offset per precision triplet (-1: upper triangle)
  std::vector<int> awa;      // per observation, per lower entry pair
  Eigen::VectorXd post_base;  // C'C contributions
  std::shared_ptr<SparseLLT> post_llt;

  // Constrained prior log-determinant per block: count * log(scale) + constant,
  // scale being tau, or tau / (1 - phi) for BYM2 (the shear b + (c/a) delta has unit Jacobian).
  struct LogDetTerm {
    int tau_slot = -1;
    int phi_slot = -1;
    double count = 0.0;
    double constant = 0.0;
  };
  std::vector<LogDetTerm> ld_terms;

  std::vector<Eigen::Triplet<double>> qtrip;
  SpMat Q;

  explicit Impl(const LatentModel& model) : m(model) {
    m.validate();
    n = m.dim();
    C = m.constraints();
    if (C.rows() > 0) {
      cct.compute(Eigen::MatrixXd(C * C.transpose()));
      log_det_cct = log_det_dense(cct);
    }
    m.precision_triplets(m.initial_theta(), qtrip);

    // constraint cross products
    std::vector<std::vector<std::pair<int, double>>> crow(C.rows());
    for (Eigen::Index k = 0; k < C.outerSize(); ++k)
      for (SpMat::InnerIterator it(C, k); it; ++it) crow[it.row()].emplace_back(static_cast<int>(it.col()), it.value());
    std::vector<std::pair<int, int>> cpos;
    std::vector<double> cval;
    for (const auto& r : crow)
      for (std::size_t a = 0; a < r.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b) {
          cpos.emplace_back(r[a].first, r[b].first);
          cval.push_back(r[a].second * r[b].second);
        }

    std::vector<std::pair<int, int>> qpos;
    for (const auto& t : qtrip) qpos.emplace_back(static_cast<int>(t.row()), static_cast<int>(t.col()));

    std::vector<std::pair<int, int>> opos;
    for (const auto& o : m.observations())
      for (std::size_t a = 0; a < o.entries.size(); ++a)
        for (std::size_t b = 0; b <= a; ++b) opos.emplace_back(o.entries[a].col, o.entries[b].col);

    std::vector<std::pair<int, int>> all = qpos;
    all.insert(all.end(), cpos.begin(), cpos.end());
    all.insert(all.end(), opos.begin(), opos.end());
    post.build(n, all);

    auto offsets = [](const Pattern& p, const std::vector<std::pair<int, int>>& pos, bool lower_only) {
      std::vector<int> out;
      out.reserve(pos.size());
      for (auto [r, c] : pos) out.push_back(lower_only && r < c ? -1 : p.pos(r, c));
      return out;
    };
    post_q = offsets(post, qpos, true);
    awa = offsets(post, opos, false);

    post_base = Eigen::VectorXd::Zero(post.mat.nonZeros());
    for (std::size_t i = 0; i < cpos.size(); ++i) {
      auto [r, c] = cpos[i];
      post_base[post.pos(r, c)] += cval[i];
    }
    post_llt = std::make_shared<SparseLLT>();
    post_llt->analyzePattern(post.mat);

    for (const auto& b : m.blocks()) {
      LogDetTerm t;
      const double groups = b.n_groups;
      switch (b.kind) {
        case BlockKind::Intercept:
          t.constant = groups * std::log(b.fixed_precision);
          break;
        case BlockKind::IID:
          t.tau_slot = b.tau_slot;
          t.count = groups * b.base_dim;
          break;
        case BlockKind::RW1: {
          t.tau_slot = b.tau_slot;
          t.count = groups * (b.base_dim - 1);
          SpMat ones(1, b.base_dim);
          for (int i = 0; i < b.base_dim; ++i) ones.insert(0, i) = 1.0;
          t.constant = groups * constrained_log_det(rw1_structure(b.base_dim), ones);
          break;
        }
        case BlockKind::BYM2:
          t.tau_slot = b.tau_slot;
          t.phi_slot = b.phi_slot;
          t.count = groups * b.base_dim;
          t.constant = groups * constrained_log_det(b.icar->R, b.icar->constraints.sparseView());
          break;
      }
      ld_terms.push_back(t);
    }
  }

  void set_theta(const Eigen::VectorXd& theta) {
    m.precision_triplets(theta, qtrip);
    Q.resize(n, n);
    Q.setFromTriplets(qtrip.begin(), qtrip.end());
  }

  // Sum of log-likelihoods; fills eta and derivative vectors.
  double data_terms(const Eigen::VectorXd& theta, const Eigen::VectorXd& u, Eigen::VectorXd* g,
                    Eigen::VectorXd* h) const {
    const auto& obs = m.observations();
    if (g) g->resize(static_cast<Eigen::Index>(obs.size()));
    if (h) h->resize(static_cast<Eigen::Index>(obs.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      double eta = 0.0;
      for (const auto& e : obs[i].entries) eta += m.entry_value(e, theta) * u[e.col];
      const auto l = m.loglik(obs[i], eta, theta);
      if (!std::isfinite(l.value)) return kNegInf;
      s += l.value;
      if (g) (*g)[i] = l.grad;
      if (h) (*h)[i] = l.hess;
    }
    return s;
  }

  double objective(const Eigen::VectorXd& theta, const Eigen::VectorXd& u) const {
    const double d = data_terms(theta, u, nullptr, nullptr);
    if (!std::isfinite(d)) return kNegInf;
    return d - 0.5 * u.dot(Q * u);
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta, const Eigen::VectorXd& u, const Eigen::VectorXd& g) const {
    Eigen::VectorXd grad = -(Q * u);
    const auto& obs = m.observations();
    for (std::size_t i = 0; i < obs.size(); ++i)
      for (const auto& e : obs[i].entries) grad[e.col] += g[i] * m.entry_value(e, theta);
    return grad;
  }

  Eigen::VectorXd project(const Eigen::VectorXd& v) const {
    if (C.rows() == 0) return v;
    return v - C.transpose() * cct.solve(C * v);
  }

  // Fills the posterior pattern with Q + A'WA + C'C + damping and factorises it.
  bool factor_posterior(const Eigen::VectorXd& theta, const Eigen::VectorXd& w, double damping, SparseLLT& llt) {
    double* v = post.mat.valuePtr();
    std::copy(post_base.data(), post_base.data() + post_base.size(), v);
    for (std::size_t k = 0; k < qtrip.size(); ++k)
      if (post_q[k] >= 0) v[post_q[k]] += qtrip[k].value();
    const auto& obs = m.observations();
    std::size_t p = 0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const auto& en = obs[i].entries;
      for (std::size_t a = 0; a < en.size(); ++a) {
        const double va = m.entry_value(en[a], theta) * w[i];
        for (std::size_t b = 0; b <= a; ++b, ++p) {
          double add = va * m.entry_value(en[b], theta);
          // off-diagonal pair landing on the diagonal (repeated column) counts twice
          if (a != b && en[a].col == en[b].col) add *= 2.0;
          v[awa[p]] += add;
        }
      }
    }
    if (damping > 0.0)
      for (int i = 0; i < n; ++i) v[post.diag[i]] += damping;
    llt.factorize(post.mat);
    return llt.info() == Eigen::Success;
  }

  // Tries the exact curvature first, then a clamped one, then Levenberg damping.
  void factor_robust(const Eigen::VectorXd& theta, const Eigen::VectorXd& h, SparseLLT& llt) {
    Eigen::VectorXd w = -h;
    if (factor_posterior(theta, w, 0.0, llt)) return;
    w = w.cwiseMax(0.0);
    if (factor_posterior(theta, w, 0.0, llt)) return;
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(post.mat.valuePtr()[post.diag[i]]));
    for (double mu = 1e-10 * std::max(scale, 1.0); mu < 1e12; mu *= 10.0)
      if (factor_posterior(theta, w, mu, llt)) return;
    throw ConvergenceError("laplace: posterior precision could not be factorised");
  }

  double prior_log_det(const Eigen::VectorXd& theta) const {
    double ld = 0.0;
    for (const auto& t : ld_terms) {
      double scale = t.tau_slot >= 0 ? theta[t.tau_slot] : 1.0;
      if (t.phi_slot >= 0) scale /= 1.0 - theta[t.phi_slot];
      ld += t.count * std::log(scale) + t.constant;
    }
    return ld;
  }

  Eigen::VectorXd constrained_step(const SparseLLT& llt, const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = llt.solve(b);
    if (C.rows() > 0) {
      const Eigen::MatrixXd X = llt.solve(Eigen::MatrixXd(C.transpose()));
      const Eigen::MatrixXd S = C * X;
      x -= X * S.ldlt().solve(C * x);
    }
    return x;
  }
};

LaplaceEngine::LaplaceEngine(const LatentModel& model) : model_(model), impl_(std::make_unique<Impl>(model)) {}
LaplaceEngine::~LaplaceEngine() = default;

double LaplaceEngine::objective(const Eigen::VectorXd& theta, const Eigen::VectorXd& u) {
  impl_->set_theta(theta);
  return impl_->objective(theta, u);
}

GaussianApprox LaplaceEngine::approx_at(const Eigen::VectorXd& theta, const Eigen::VectorXd& u) {
  auto& I = *impl_;
  I.set_theta(theta);
  Eigen::VectorXd g, h;
  if (!std::isfinite(I.data_terms(theta, u, &g, &h)))
    throw DomainError("gaussian approximation: latent point outside the likelihood support");
  auto llt = std::make_shared<SparseLLT>();
  llt->analyzePattern(I.post.mat);
  I.factor_robust(theta, h, *llt);
  GaussianApprox out;
  out.adopt(std::move(llt), I.C);
  return out;
}

LaplaceResult LaplaceEngine::fit(const Eigen::VectorXd& theta, const Eigen::VectorXd* start,
                                 const LaplaceOptions& opt, bool keep_approx) {
  auto& I = *impl_;
  if (theta.size() != static_cast<Eigen::Index>(model_.hypers().size()))
    throw DimensionError("laplace: hyperparameter vector has the wrong length");
  I.set_theta(theta);
  LaplaceResult res;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(I.n);
  if (start && start->size() == I.n) u = I.project(*start);
  double f = I.objective(theta, u);
  if (!std::isfinite(f) && start) {
    u.setZero();
    f = I.objective(theta, u);
  }
  if (!std::isfinite(f)) {
    res.mode = u;
    res.log_marginal = kNegInf;
    return res;
  }

  Eigen::VectorXd g, h;
  for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
    I.data_terms(theta, u, &g, &h);
    const Eigen::VectorXd grad = I.gradient(theta, u, g);
    res.grad_norm = I.project(grad).lpNorm<Eigen::Infinity>();
    if (res.grad_norm < opt.grad_tol) {
      res.converged = true;
      break;
    }
    I.factor_robust(theta, h, *I.post_llt);
    const Eigen::VectorXd step = I.constrained_step(*I.post_llt, grad);

    double t = 1.0, f_new = kNegInf;
    Eigen::VectorXd trial;
    const double slack = 1e-12 * (1.0 + std::abs(f));
    for (int k = 0; k < 40; ++k, t *= 0.5) {
      trial = u + t * step;
      f_new = I.objective(theta, trial);
      if (std::isfinite(f_new) && f_new >= f - slack) break;
    }
    if (!(std::isfinite(f_new) && f_new >= f - slack)) break;  // no ascent direction left
    const double moved = (t * step).lpNorm<Eigen::Infinity>();
    u = trial;
    f = f_new;
    res.trace.push_back(f);
    if (moved < opt.step_tol * (1.0 + u.lpNorm<Eigen::Infinity>())) {
      I.data_terms(theta, u, &g, &h);
      res.grad_norm = I.project(I.gradient(theta, u, g)).lpNorm<Eigen::Infinity>();
      res.converged = res.grad_norm < opt.grad_tol;
      ++res.iterations;
      break;
    }
  }

  res.mode = u;
  res.log_lik = I.data_terms(theta, u, &g, &h);
  const double quad = u.dot(I.Q * u);
  res.log_det_prior = I.prior_log_det(theta);
  I.factor_robust(theta, h, *I.post_llt);
  res.log_det_post = log_det_llt(*I.post_llt);
  if (I.C.rows() > 0) {
    const Eigen::MatrixXd S = I.C * I.post_llt->solve(Eigen::MatrixXd(I.C.transpose()));
    res.log_det_post += log_det_dense(Eigen::LDLT<Eigen::MatrixXd>(S)) - I.log_det_cct;
  }
  res.log_marginal = res.log_lik - 0.5 * quad + 0.5 * res.log_det_prior - 0.5 * res.log_det_post;
  if (keep_approx) {
    res.approx.adopt(I.post_llt, I.C);
    I.post_llt = std::make_shared<SparseLLT>();
    I.post_llt->analyzePattern(I.post.mat);
  }
  return res;
}

LaplaceResult laplace_fit(const LatentModel& model, const Eigen::VectorXd& theta, const Eigen::VectorXd* start,
                          const LaplaceOptions& opt, bool keep_approx) {
  LaplaceEngine engine(model);
  return engine.fit(theta, start, opt, keep_approx);
}

}  // namespace firecast::latent
