#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "firecast/errors.hpp"
#include "firecast/latent.hpp"
#include "firecast/random.hpp"
#include "oracles.hpp"

using namespace firecast;
using namespace firecast::testing;
using namespace firecast::latent;

namespace {


// log det of Q restricted to null(C), via an orthonormal null-space basis from QR.
double subspace_log_det(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& C) {
  const Eigen::Index n = Q.rows(), k = C.rows();
  if (k == 0) return std::log(Q.determinant());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(C.transpose());
  const Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd V = full.rightCols(n - k);
  const Eigen::MatrixXd inner = V.transpose() * Q * V;
  return std::log(inner.determinant());
}

HyperParam fixed_hyper(const std::string& name, double value) {
  HyperParam h;
  h.name = name;
  h.initial = value;
  h.fixed = true;
  h.prior = Prior::gamma(1.0, 1.0);
  return h;
}

Block make_block(const std::string& name, BlockKind kind, int dim, int tau = -1, int groups = 1) {
  Block b;
  b.name = name;
  b.kind = kind;
  b.base_dim = dim;
  b.tau_slot = tau;
  b.n_groups = groups;
  return b;
}

// Intercept + IID + RW1 + grouped BYM2 with Gaussian observations at fixed hyperparameters.
LatentModel gaussian_anchor_model(std::uint64_t seed, int n_obs) {
  LatentModel m;
  const int t_iid = m.add_hyper(fixed_hyper("tau_iid", 2.0));
  const int t_rw = m.add_hyper(fixed_hyper("tau_rw", 5.0));
  const int t_b = m.add_hyper(fixed_hyper("tau_bym", 1.5));
  const int p_b = m.add_hyper(fixed_hyper("phi_bym", 0.6));
  const int beta = m.add_hyper(fixed_hyper("beta", 0.7));
  Block b0 = make_block("int", BlockKind::Intercept, 1);
  b0.fixed_precision = 0.01;
  const Block i0 = m.blocks()[m.add_block(b0)];
  const Block iid = m.blocks()[m.add_block(make_block("iid", BlockKind::IID, 8, t_iid))];
  const Block rw = m.blocks()[m.add_block(make_block("rw", BlockKind::RW1, 10, t_rw))];
  Block by = make_block("bym", BlockKind::BYM2, 12, t_b, 3);
  by.phi_slot = p_b;
  by.icar = std::make_shared<ScaledIcar>(build_icar_scaled(Graph::lattice(3, 4)));
  by = m.blocks()[m.add_block(by)];
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n_obs; ++i) {
    Observation o;
    o.lik = LikKind::Gaussian;
    o.gauss_precision = 0.5 + dist::uniform_open(rng) * 2.0;
    o.y = 3.0 * dist::uniform_open(rng) - 1.0;
    o.entries = {{i0.offset},
                 {iid.index(static_cast<int>(uniform_index(rng, 8)))},
                 {rw.index(static_cast<int>(uniform_index(rng, 10)))},
                 {by.index(static_cast<int>(uniform_index(rng, 12)), static_cast<int>(uniform_index(rng, 3))),
                  i % 2 == 0 ? -1 : beta}};
    m.add_observation(o);
  }
  return m;
}

// Joint prior covariance of all blocks (dense) from the KKT oracle.
Eigen::MatrixXd prior_covariance(const LatentModel& m, const Eigen::VectorXd& theta) {
  return kkt_covariance(Eigen::MatrixXd(m.precision(theta)), Eigen::MatrixXd(m.constraints()));
}

Fit single_point_fit(const LatentModel& m, const Eigen::VectorXd& theta) {
  Fit fit;
  HyperPoint p;
  p.theta = theta;
  auto r = laplace_fit(m, theta);
  p.mode = r.mode;
  p.approx = r.approx;
  p.weight = 1.0;
  fit.points.push_back(std::move(p));
  return fit;
}

}  // namespace

TEST_CASE("rw1 structure matrix, null space and quadratic form") {
  const Eigen::MatrixXd D = Eigen::MatrixXd(rw1_structure(3));
  Eigen::Matrix3d want;
  want << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  CHECK((D - want).norm() == 0.0);
  const Eigen::MatrixXd D6 = Eigen::MatrixXd(rw1_structure(6));
  CHECK((D6 * Eigen::VectorXd::Ones(6)).norm() == 0.0);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(D6);
  CHECK(lu.rank() == 5);
  Eigen::VectorXd x(6);
  x << 0.3, -1.2, 2.0, 0.5, 0.5, -4.0;
  double sq = 0.0;
  for (int k = 1; k < 6; ++k) sq += (x[k] - x[k - 1]) * (x[k] - x[k - 1]);
  CHECK(x.dot(D6 * x) == doctest::Approx(sq).epsilon(1e-14));
  CHECK_THROWS_AS(rw1_structure(1), ParameterError);
}

TEST_CASE("rw1 block declares one constraint and rank n-1") {
  LatentModel m;
  const int t = m.add_hyper(fixed_hyper("tau", 3.0));
  m.add_block(make_block("r", BlockKind::RW1, 7, t));
  const Eigen::MatrixXd Q = Eigen::MatrixXd(m.precision(m.initial_theta()));
  CHECK(m.n_constraints() == 1);
  CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(Q).rank() == 6);
  CHECK((Q - 3.0 * Eigen::MatrixXd(rw1_structure(7))).norm() < 1e-14);
}

TEST_CASE("quantile binning: equal shares, clamping and conditional edges") {
  std::vector<double> v(40);
  for (int i = 0; i < 40; ++i) v[i] = i;
  const auto b = bin_covariate(v, 20);
  CHECK(b.n_bins() == 20);
  std::vector<int> counts(20, 0);
  for (double x : v) ++counts[b.bin(x)];
  for (int c : counts) CHECK(c == 2);
  CHECK(b.bin(-100.0) == 0);
  CHECK(b.bin(1e9) == 19);

  // conditional edges match a recomputation on the masked rows alone
  std::mt19937_64 rng(7);
  std::vector<double> vals(500);
  std::vector<bool> mask(500);
  std::vector<double> kept;
  for (int i = 0; i < 500; ++i) {
    vals[i] = std::exp(3.0 * dist::uniform_open(rng));
    mask[i] = dist::uniform_open(rng) < 0.3;
    if (mask[i]) kept.push_back(vals[i]);
  }
  const auto cond = bin_covariate(vals, 20, &mask);
  const auto direct = bin_covariate(kept, 20);
  CHECK(cond.cuts == direct.cuts);
  std::sort(kept.begin(), kept.end());
  for (int j = 1; j < 20; ++j) {
    const std::size_t idx = static_cast<std::size_t>(std::ceil(j * kept.size() / 20.0)) - 1;
    CHECK(cond.cuts[j - 1] == kept[idx]);
  }
  CHECK_FALSE(cond.collapsed);

  // ties collapse
  std::vector<double> ties(30, 1.0);
  for (int i = 0; i < 5; ++i) ties[i] = 0.0;
  const auto tb = bin_covariate(ties, 10);
  CHECK(tb.collapsed);
  CHECK(tb.n_bins() == 2);
}

TEST_CASE("scaled ICAR: path graph structure and unit geometric-mean variance") {
  const Graph path = Graph::from_edges(3, {{0, 1}, {1, 2}});
  Eigen::Matrix3d want;
  want << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  CHECK((Eigen::MatrixXd(path.icar_structure()) - want).norm() == 0.0);

  for (const Graph& g : {path, Graph::lattice(3, 3), Graph::lattice(6, 6)}) {
    const auto icar = build_icar_scaled(g);
    const Eigen::MatrixXd R = Eigen::MatrixXd(icar.R);
    // pseudo-inverse oracle: invert the non-null eigenvalues
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
    Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(R.rows(), R.cols());
    for (Eigen::Index i = 0; i < R.rows(); ++i)
      if (es.eigenvalues()[i] > 1e-9)
        pinv += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / es.eigenvalues()[i];
    double ml = 0.0;
    for (Eigen::Index i = 0; i < R.rows(); ++i) ml += std::log(pinv(i, i));
    CHECK(std::abs(std::exp(ml / R.rows()) - 1.0) < 1e-8);
    CHECK(icar.constraints.rows() == 1);
  }
}

TEST_CASE("scaled ICAR: one zero eigenvalue and one constraint per component, singletons unconstrained") {
  // two paths and an isolated node
  const Graph g = Graph::from_edges(6, {{0, 1}, {1, 2}, {3, 4}});
  CHECK(g.n_components() == 3);
  const auto raw = Eigen::MatrixXd(g.icar_structure());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(raw);
  int zeros = 0;
  for (Eigen::Index i = 0; i < 6; ++i) zeros += std::abs(es.eigenvalues()[i]) < 1e-12;
  CHECK(zeros == 3);
  const auto icar = build_icar_scaled(g);
  CHECK(icar.constraints.rows() == 2);
  CHECK(icar.R.coeff(5, 5) == 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2{Eigen::MatrixXd(icar.R)};
  zeros = 0;
  for (Eigen::Index i = 0; i < 6; ++i) zeros += std::abs(es2.eigenvalues()[i]) < 1e-12;
  CHECK(zeros == 2);
}

TEST_CASE("constrained log-determinant matches the null-space basis oracle") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 9;
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B(i, j) = dist::uniform_open(rng) - 0.5;
    Eigen::MatrixXd Q = B * B.transpose();
    // make Q singular along an arbitrary direction
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
    v[0] = 2.0;
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n) - v * v.transpose() / v.squaredNorm();
    Q = P * Q * P;
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(2, n);
    for (int i = 0; i < 5; ++i) C(0, i) = 1.0;
    for (int i = 4; i < n; ++i) C(1, i) = 1.0 + 0.1 * i;
    const double got = constrained_log_det(Q.sparseView(), C.sparseView());
    CHECK(got == doctest::Approx(subspace_log_det(Q, C)).epsilon(1e-10));
  }
}

TEST_CASE("BYM2 block: marginal covariance of b and its limits") {
  const Graph g = Graph::lattice(3, 3);
  auto icar = std::make_shared<ScaledIcar>(build_icar_scaled(g));
  const Eigen::MatrixXd sig_icar = kkt_covariance(Eigen::MatrixXd(icar->R), icar->constraints);
  for (double phi : {1e-9, 0.3, 0.8, 1.0 - 1e-9}) {
    LatentModel m;
    const int t = m.add_hyper(fixed_hyper("tau", 2.5));
    const int p = m.add_hyper(fixed_hyper("phi", phi));
    Block b = make_block("g", BlockKind::BYM2, 9, t);
    b.phi_slot = p;
    b.icar = icar;
    m.add_block(b);
    const Eigen::MatrixXd cov = prior_covariance(m, m.initial_theta()).topLeftCorner(9, 9);
    const Eigen::MatrixXd want =
        ((1.0 - phi) * Eigen::MatrixXd::Identity(9, 9) + phi * sig_icar) / 2.5;
    CHECK((cov - want).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("BYM2 prior draws on a 3x3 lattice reproduce the analytic covariance") {
  const Graph g = Graph::lattice(3, 3);
  auto icar = std::make_shared<ScaledIcar>(build_icar_scaled(g));
  LatentModel m;
  const int t = m.add_hyper(fixed_hyper("tau", 0.8));
  const int p = m.add_hyper(fixed_hyper("phi", 0.6));
  Block b = make_block("g", BlockKind::BYM2, 9, t);
  b.phi_slot = p;
  b.icar = icar;
  m.add_block(b);
  const Eigen::VectorXd th = m.initial_theta();
  const Eigen::MatrixXd sig_icar = kkt_covariance(Eigen::MatrixXd(icar->R), icar->constraints);
  const Eigen::MatrixXd want = ((1.0 - 0.6) * Eigen::MatrixXd::Identity(9, 9) + 0.6 * sig_icar) / 0.8;

  GaussianApprox ga;
  ga.factorize(m.precision(th), m.constraints());
  std::mt19937_64 rng(11);
  const int n = 100000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(9, 9);
  double worst_constraint = 0.0;
  for (int s = 0; s < n; ++s) {
    const Eigen::VectorXd u = ga.sample(rng);
    worst_constraint = std::max(worst_constraint, std::abs(u.tail(9).sum()));
    acc += u.head(9) * u.head(9).transpose();
  }
  acc /= n;
  CHECK(worst_constraint < 1e-10);
  CHECK((acc - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("grouped effects: one group reduces to the spatial block, groups are uncorrelated") {
  const Graph g = Graph::lattice(2, 3);
  auto icar = std::make_shared<ScaledIcar>(build_icar_scaled(g));
  auto build = [&](int groups) {
    LatentModel m;
    const int t = m.add_hyper(fixed_hyper("tau", 1.3));
    const int p = m.add_hyper(fixed_hyper("phi", 0.5));
    Block b = make_block("g", BlockKind::BYM2, 6, t, groups);
    b.phi_slot = p;
    b.icar = icar;
    m.add_block(b);
    return m;
  };
  const LatentModel one = build(1), three = build(3);
  const Eigen::MatrixXd q1 = Eigen::MatrixXd(one.precision(one.initial_theta()));
  const Eigen::MatrixXd q3 = Eigen::MatrixXd(three.precision(three.initial_theta()));
  CHECK(three.dim() == 36);
  CHECK(three.n_constraints() == 3);
  for (int gi = 0; gi < 3; ++gi) CHECK((q3.block(12 * gi, 12 * gi, 12, 12) - q1).norm() == 0.0);

  GaussianApprox ga;
  ga.factorize(three.precision(three.initial_theta()), three.constraints());
  std::mt19937_64 rng(5);
  const int n = 100000;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int s = 0; s < n; ++s) {
    const Eigen::VectorXd u = ga.sample(rng);
    const double x = u[three.blocks()[0].index(2, 0)], y = u[three.blocks()[0].index(2, 1)];
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.02);
}

TEST_CASE("Gaussian observations: Laplace evidence, posterior mean and variance are exact") {
  const LatentModel m = gaussian_anchor_model(21, 100);
  const Eigen::VectorXd th = m.initial_theta();
  const Eigen::MatrixXd S = prior_covariance(m, th);
  const Eigen::MatrixXd A = Eigen::MatrixXd(m.design(m.observations(), th));
  Eigen::VectorXd y(100), noise(100);
  for (int i = 0; i < 100; ++i) {
    y[i] = m.observations()[i].y;
    noise[i] = 1.0 / m.observations()[i].gauss_precision;
  }
  const Eigen::MatrixXd K = A * S * A.transpose() + Eigen::MatrixXd(noise.asDiagonal());
  const Eigen::LLT<Eigen::MatrixXd> kl(K);
  const Eigen::VectorXd alpha = kl.solve(y);
  double logdet = 0.0;
  for (int i = 0; i < 100; ++i) logdet += 2.0 * std::log(kl.matrixL()(i, i));
  const double evidence = -0.5 * y.dot(alpha) - 0.5 * logdet - 50.0 * std::log(2.0 * M_PI);
  const Eigen::VectorXd post_mean = S * A.transpose() * alpha;
  const Eigen::MatrixXd post_cov = S - S * A.transpose() * kl.solve(A * S);

  const auto r = laplace_fit(m, th);
  CHECK(r.converged);
  CHECK(std::abs(r.log_marginal - evidence) < 1e-8);
  CHECK((r.mode - post_mean).cwiseAbs().maxCoeff() < 1e-6);
  double worst = 0.0;
  for (int i = 0; i < m.dim(); ++i) worst = std::max(worst, std::abs(r.approx.variance(i) - post_cov(i, i)));
  CHECK(worst < 1e-6);
  const Eigen::VectorXd pv = r.approx.variances(m.design(m.observations(), th));
  const Eigen::VectorXd want_pv = (A * post_cov * A.transpose()).diagonal();
  CHECK((pv - want_pv).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("Gaussian observations: predictive draws reproduce closed-form posterior moments") {
  const LatentModel m = gaussian_anchor_model(4, 60);
  const Eigen::VectorXd th = m.initial_theta();
  const Fit fit = single_point_fit(m, th);
  std::vector<LinearPredictor> rows;
  for (int i = 0; i < 5; ++i) rows.push_back({m.observations()[i].entries});
  const Eigen::MatrixXd draws = sample_linear_predictors(m, fit, rows, 40000, 9);
  const Eigen::MatrixXd S = prior_covariance(m, th);
  const Eigen::MatrixXd A = Eigen::MatrixXd(m.design(m.observations(), th));
  Eigen::VectorXd y(60), noise(60);
  for (int i = 0; i < 60; ++i) {
    y[i] = m.observations()[i].y;
    noise[i] = 1.0 / m.observations()[i].gauss_precision;
  }
  const Eigen::MatrixXd K = A * S * A.transpose() + Eigen::MatrixXd(noise.asDiagonal());
  const Eigen::VectorXd mean = A.topRows(5) * S * A.transpose() * K.ldlt().solve(y);
  const Eigen::MatrixXd cov = A.topRows(5) * (S - S * A.transpose() * K.ldlt().solve(A * S)) * A.topRows(5).transpose();
  for (int i = 0; i < 5; ++i) {
    const double mu = draws.row(i).mean();
    const double var = (draws.row(i).array() - mu).square().mean();
    CHECK(std::abs(mu - mean[i]) < 4.0 * std::sqrt(cov(i, i) / 40000.0) + 1e-12);
    CHECK(std::abs(var / cov(i, i) - 1.0) < 0.03);
  }
}

TEST_CASE("Bernoulli intercept-only mode is logit(k/n) in the flat-prior limit") {
  LatentModel m;
  Block b = make_block("int", BlockKind::Intercept, 1);
  b.fixed_precision = 1e-12;
  m.add_block(b);
  for (int i = 0; i < 40; ++i) {
    Observation o;
    o.lik = LikKind::Bernoulli;
    o.y = i < 13 ? 1.0 : 0.0;
    o.entries = {{0}};
    m.add_observation(o);
  }
  const auto r = laplace_fit(m, Eigen::VectorXd(0));
  CHECK(r.converged);
  CHECK(r.mode[0] == doctest::Approx(std::log(13.0 / 27.0)).epsilon(1e-9));
}

namespace {

// Three-likelihood toy with an RW1 effect on a covariate shared by all rows.
LatentModel hurdle_toy(std::uint64_t seed, bool shuffle) {
  LatentModel m;
  HyperParam xi = fixed_hyper("xi", 0.15);
  HyperParam kappa = fixed_hyper("kappa", 1.2);
  m.xi_slot = m.add_hyper(xi);
  m.kappa_slot = m.add_hyper(kappa);
  const int t = m.add_hyper(fixed_hyper("tau", 4.0));
  const Block bz = m.blocks()[m.add_block(make_block("iz", BlockKind::Intercept, 1))];
  const Block bc = m.blocks()[m.add_block(make_block("ic", BlockKind::Intercept, 1))];
  const Block bb = m.blocks()[m.add_block(make_block("ib", BlockKind::Intercept, 1))];
  const Block rw = m.blocks()[m.add_block(make_block("r", BlockKind::RW1, 10, t))];
  std::mt19937_64 rng(seed);
  const int n = 300;
  std::vector<int> bin(n);
  std::vector<double> z(n), c(n), a(n);
  for (int i = 0; i < n; ++i) {
    bin[i] = static_cast<int>(uniform_index(rng, 10));
    const double eff = 0.35 * (bin[i] - 4.5);
    z[i] = dist::uniform_open(rng) < dist::inv_logit(-0.3 + eff) ? 1.0 : 0.0;
    c[i] = static_cast<double>(dist::trunc_poisson_draw(std::exp(0.5 + eff), rng));
    const double sigma = dist::egp_sigma_from_eta({0.5, 1.0 + eff}, 0.15, 1.2);
    a[i] = dist::egp_quantile(dist::uniform_open(rng), {sigma, 0.15, 1.2});
  }
  if (shuffle) {
    const auto perm = permutation(n, rng);
    std::vector<int> b2(n);
    for (int i = 0; i < n; ++i) b2[i] = bin[perm[i]];
    bin = b2;
  }
  for (int i = 0; i < n; ++i) {
    Observation oz;
    oz.lik = LikKind::Bernoulli;
    oz.y = z[i];
    oz.entries = {{bz.offset}, {rw.index(bin[i])}};
    m.add_observation(oz);
    if (z[i] > 0) {
      Observation oc;
      oc.lik = LikKind::TruncPoisson;
      oc.y = c[i];
      oc.entries = {{bc.offset}, {rw.index(bin[i])}};
      m.add_observation(oc);
      Observation ob;
      ob.lik = LikKind::EGP;
      ob.y = a[i];
      ob.entries = {{bb.offset}, {rw.index(bin[i])}};
      m.add_observation(ob);
    }
  }
  return m;
}

}  // namespace

TEST_CASE("Laplace mode is a constrained stationary point for the three-likelihood toy") {
  const LatentModel m = hurdle_toy(1, false);
  const Eigen::VectorXd th = m.initial_theta();
  const auto r = laplace_fit(m, th);
  CHECK(r.converged);
  CHECK(r.grad_norm < 1e-8);
  CHECK(std::abs(Eigen::VectorXd(m.constraints() * r.mode).norm()) < 1e-10);
  // independent check of the projected gradient by central differences of the objective
  LaplaceEngine engine(m);
  const Eigen::MatrixXd C = Eigen::MatrixXd(m.constraints());
  Eigen::VectorXd g(m.dim());
  for (int i = 0; i < m.dim(); ++i) {
    Eigen::VectorXd up = r.mode, dn = r.mode;
    up[i] += 1e-5;
    dn[i] -= 1e-5;
    g[i] = (engine.objective(th, up) - engine.objective(th, dn)) / 2e-5;
  }
  const Eigen::VectorXd pg = g - C.transpose() * (C * C.transpose()).ldlt().solve(C * g);
  CHECK(pg.cwiseAbs().maxCoeff() < 1e-5);
  // the iteration trace is monotone
  for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] >= r.trace[k - 1] - 1e-9);
}

TEST_CASE("log marginal likelihood drops when responses are shuffled against the covariate") {
  int wins = 0;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const LatentModel a = hurdle_toy(seed, false);
    const LatentModel b = hurdle_toy(seed, true);
    const double la = laplace_fit(a, a.initial_theta()).log_marginal;
    const double lb = laplace_fit(b, b.initial_theta()).log_marginal;
    wins += la > lb;
  }
  CHECK(wins >= 18);
}

TEST_CASE("scaling slot reparameterisation leaves the likelihood unchanged") {
  const Graph g = Graph::lattice(2, 3);
  auto icar = std::make_shared<ScaledIcar>(build_icar_scaled(g));
  auto build = [&](double tau, double beta) {
    LatentModel m;
    const int t = m.add_hyper(fixed_hyper("tau", tau));
    const int p = m.add_hyper(fixed_hyper("phi", 0.4));
    const int bs = m.add_hyper(fixed_hyper("beta", beta));
    Block b = make_block("g", BlockKind::BYM2, 6, t, 2);
    b.phi_slot = p;
    b.icar = icar;
    const Block gb = m.blocks()[m.add_block(b)];
    for (int i = 0; i < 12; ++i) {
      Observation o;
      o.lik = LikKind::Gaussian;
      o.y = 0.1 * i - 0.4;
      o.entries = {{gb.index(i % 6, i / 6), bs}};
      m.add_observation(o);
    }
    return m;
  };
  const double c = 1.7;
  const LatentModel m1 = build(2.0, 0.9), m2 = build(2.0 / (c * c), 0.9 / c);
  std::mt19937_64 rng(2);
  Eigen::VectorXd u = sample_prior(m1, m1.initial_theta(), rng);
  Eigen::VectorXd u2 = u;
  for (int gi = 0; gi < 2; ++gi)
    for (int i = 0; i < 6; ++i) u2[m1.blocks()[0].index(i, gi)] *= c;  // b scales, delta does not
  LaplaceEngine e1(m1), e2(m2);
  CHECK(e2.objective(m2.initial_theta(), u2) == doctest::Approx(e1.objective(m1.initial_theta(), u)).epsilon(1e-12));
  // prior normalisers differ by the Jacobian of b -> c b: 12 scaled coordinates
  const double ld1 = constrained_log_det(m1.precision(m1.initial_theta()), m1.constraints());
  const double ld2 = constrained_log_det(m2.precision(m2.initial_theta()), m2.constraints());
  CHECK(0.5 * (ld1 - ld2) == doctest::Approx(12.0 * std::log(c)).epsilon(1e-10));
}

TEST_CASE("hyperparameter transforms and priors") {
  Transform lg{TransformKind::Logit, -0.5, 0.5};
  CHECK(lg.to_natural(lg.to_internal(0.2)) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(testing::central_diff([&](double x) { return lg.to_natural(x); }, 0.3) ==
        doctest::Approx(std::exp(lg.log_jacobian(0.3))).epsilon(1e-8));
  Transform ex{TransformKind::Log};
  CHECK(std::exp(ex.log_jacobian(0.7)) == doctest::Approx(std::exp(0.7)));

  // PC precision prior: proper and P(1/sqrt(tau) > 1) = 0.01
  const Prior pp = Prior::pc_prec(1.0, 0.01);
  auto dens = [&](double t) { return std::exp(pp.log_density(t)); };
  CHECK(testing::integrate_log_scale(dens, -30.0, 70.0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(testing::integrate_log_scale(dens, -30.0, 0.0) == doctest::Approx(0.01).epsilon(1e-8));

  const Prior gp = Prior::gamma(0.1, 0.1);
  CHECK(testing::integrate_log_scale([&](double t) { return std::exp(gp.log_density(t)); }, -300.0, 8.0) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("PC prior on the BYM2 mixing weight is proper and calibrated") {
  for (const Graph& g : {Graph::lattice(6, 6), Graph::lattice(2, 2), Graph::lattice(1, 8)}) {
    const auto icar = build_icar_scaled(g);
    const Prior p = Prior::pc_bym2_phi(icar.cov_eigen, 0.5, 0.5);
    auto dens = [&](double phi) { return std::exp(p.log_density(phi)); };
    const double total = testing::integrate(dens, 0.0, 0.5) + testing::integrate(dens, 0.5, 1.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-7));
    const double below = testing::integrate(dens, 0.0, 0.5);
    const double floor = bym2_phi_distance(0.5, icar.cov_eigen) / bym2_phi_distance(1.0, icar.cov_eigen);
    if (floor < 0.5) {
      CHECK(below == doctest::Approx(0.5).epsilon(1e-7));
    } else {
      CHECK(below == doctest::Approx(floor).epsilon(1e-3));
    }
  }
}

TEST_CASE("grid weights sum to one and a single point reduces to the mode") {
  LatentModel m;
  HyperParam tau;
  tau.name = "tau";
  tau.prior = Prior::gamma(2.0, 1.0);
  tau.initial = 1.0;
  const int t = m.add_hyper(tau);
  m.add_block(make_block("u", BlockKind::IID, 30, t));
  std::mt19937_64 rng(8);
  for (int i = 0; i < 30; ++i) {
    Observation o;
    o.lik = LikKind::Gaussian;
    o.y = 1.4 * standard_normal(rng);
    o.entries = {{i}};
    m.add_observation(o);
  }
  GridConfig one;
  one.strategy = GridStrategy::ModeOnly;
  const Fit f1 = hyper_grid(m, one);
  REQUIRE(f1.points.size() == 1);
  CHECK(f1.points[0].weight == 1.0);
  CHECK(f1.points[0].internal[0] == f1.mode.internal[0]);

  GridConfig ax;
  ax.axial_levels = {-2, -1, 1, 2};
  const Fit f2 = hyper_grid(m, ax);
  double s = 0.0;
  for (const auto& p : f2.points) s += p.weight;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f2.points.size() == 5);
}

TEST_CASE("grid posterior mean of a precision matches quadrature of the exact posterior") {
  LatentModel m;
  HyperParam tau;
  tau.name = "tau";
  tau.prior = Prior::gamma(2.0, 1.0);
  tau.initial = 1.0;
  const int t = m.add_hyper(tau);
  m.add_block(make_block("u", BlockKind::IID, 25, t));
  std::mt19937_64 rng(12);
  std::vector<double> y(25);
  for (int i = 0; i < 25; ++i) {
    y[i] = 1.3 * standard_normal(rng);
    Observation o;
    o.lik = LikKind::Gaussian;
    o.y = y[i];
    o.entries = {{i}};
    m.add_observation(o);
  }
  // exact: y_i ~ N(0, 1 + 1/tau), tau ~ Gamma(2, 1)
  auto log_post = [&](double tv) {
    double s = std::log(tv) - tv;
    const double v = 1.0 + 1.0 / tv;
    for (double yi : y) s += -0.5 * std::log(v) - 0.5 * yi * yi / v;
    return s;
  };
  double peak = -1e300;
  for (double ls = -8; ls < 8; ls += 0.01) peak = std::max(peak, log_post(std::exp(ls)));
  auto w = [&](double tv) { return std::exp(log_post(tv) - peak); };
  const double z = testing::integrate_log_scale(w, -15.0, 10.0);
  const double mean = testing::integrate_log_scale([&](double tv) { return tv * w(tv); }, -15.0, 10.0) / z;

  GridConfig cfg;
  cfg.axial_levels.clear();
  for (double l = -4.0; l <= 4.0; l += 0.5)
    if (l != 0.0) cfg.axial_levels.push_back(l);
  cfg.step_sigma = 1.0;
  cfg.prune = 50.0;
  const Fit fit = hyper_grid(m, cfg);
  CHECK(std::abs(hyper_posterior_mean(fit)[0] / mean - 1.0) < 0.01);
}

TEST_CASE("posterior predictive: hurdle semantics, forced zeros and truncated Poisson marginal") {
  // latent = three intercepts pinned by a sharp Gaussian posterior
  LatentModel m;
  m.xi_slot = m.add_hyper(fixed_hyper("xi", 0.1));
  m.kappa_slot = m.add_hyper(fixed_hyper("kappa", 0.9));
  for (const char* n : {"iz", "ic", "ib"}) m.add_block(make_block(n, BlockKind::Intercept, 1));
  auto make_fit = [&](double ez, double ec, double eb) {
    Fit fit;
    HyperPoint p;
    p.theta = m.initial_theta();
    p.mode = Eigen::Vector3d(ez, ec, eb);
    p.weight = 1.0;
    SpMat P(3, 3);
    P.setIdentity();
    P *= 1e16;
    p.approx.factorize(P, SpMat(0, 3));
    fit.points.push_back(p);
    return fit;
  };
  PredictiveCell cell;
  cell.z.entries = {{0}};
  cell.c.entries = {{1}};
  cell.b.entries = {{2}};

  const auto none = posterior_predictive(m, make_fit(-800.0, 0.0, 0.0), {cell}, 500, 1);
  for (int s = 0; s < 500; ++s) CHECK(none.z[0][s] == 0);

  const double lambda = 1.7;
  const int n = 100000;
  const auto d = posterior_predictive(m, make_fit(0.4, std::log(lambda), 1.0), {cell}, n, 2);
  std::vector<int> hist(12, 0);
  int fires = 0;
  for (int s = 0; s < n; ++s) {
    CHECK_MESSAGE(d.count[0][s] >= 1.0, "conditional counts are positive");
    CHECK_MESSAGE(d.area[0][s] > 0.0, "conditional areas are positive");
    fires += d.z[0][s];
    if (d.count[0][s] < 12) ++hist[static_cast<int>(d.count[0][s])];
  }
  CHECK(std::abs(fires / double(n) - dist::inv_logit(0.4)) < 0.01);
  for (int y = 1; y < 12; ++y)
    CHECK(std::abs(hist[y] / double(n) - dist::trunc_poisson_pmf(y, {lambda})) < 0.01);
  // area draws are squared eGP draws with the median link
  std::vector<double> roots(n);
  for (int s = 0; s < n; ++s) roots[s] = std::sqrt(d.area[0][s]);
  std::sort(roots.begin(), roots.end());
  CHECK(std::abs(roots[n / 2] - std::exp(1.0)) / std::exp(1.0) < 0.02);
  CHECK(d.failures[0] == 0);

  // seeds determine the draws
  const auto again = posterior_predictive(m, make_fit(0.4, std::log(lambda), 1.0), {cell}, 100, 2);
  for (int s = 0; s < 100; ++s) CHECK(again.count[0][s] == d.count[0][s]);
}

namespace {

HurdleInputs toy_inputs(std::uint64_t seed) {
  HurdleInputs in;
  in.council_graph = Graph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
  in.district_graph = Graph::from_edges(2, {{0, 1}});
  in.unit_district = {0, 0, 1, 1};
  std::mt19937_64 rng(seed);
  for (int t = 0; t < 30; ++t)
    for (int s = 0; s < 4; ++s) {
      HurdleCell c;
      c.unit = s;
      c.time = 100 + t;
      c.month = t % 12 + 1;
      c.year = 2010 + t / 12;
      c.fc_count = std::exp(dist::uniform_open(rng));
      c.fc_area = 2.0 * dist::uniform_open(rng);
      const bool fire = dist::uniform_open(rng) < 0.5;
      c.count = fire ? static_cast<double>(dist::trunc_poisson_draw(c.fc_count, rng)) : 0.0;
      c.area = fire ? 1.0 + 10.0 * dist::uniform_open(rng) : 0.0;
      (t < 24 ? in.train : in.test).push_back(c);
    }
  return in;
}

}  // namespace

TEST_CASE("hurdle assembly: counting identity, one index per block and variant switches") {
  const auto in = toy_inputs(3);
  HurdleConfig cfg;
  cfg.n_bins = 5;
  const auto hm = assemble(in, cfg);
  const auto& m = hm.model;
  int expected = 3;                 // intercepts
  expected += 2 * 4 * 12;           // council BYM2 by calendar month
  expected += 2 * 2 * 30;           // district BYM2 by unique time
  expected += 3 * 3;                // year effects, three years
  expected += 4 * 5;                // RW1 over binned forecasts
  CHECK(m.dim() == expected);
  CHECK(m.hypers().size() == 17);
  CHECK(hm.n_z_rows == 96);
  int fires = 0;
  for (const auto& c : in.train) fires += c.count > 0;
  CHECK(hm.n_c_rows == fires);
  CHECK(static_cast<int>(m.observations().size()) == 96 + 2 * fires);
  CHECK(hm.test.size() == 24);

  auto block_of = [&](int col) {
    for (std::size_t b = 0; b < m.blocks().size(); ++b)
      if (col >= m.blocks()[b].offset && col < m.blocks()[b].offset + m.blocks()[b].dim()) return static_cast<int>(b);
    return -1;
  };
  for (const auto& o : m.observations()) {
    std::set<int> seen;
    for (const auto& e : o.entries) CHECK(seen.insert(block_of(e.col)).second);
    CHECK(seen.size() == (o.predictor == 0 ? 6u : 5u));
  }
  // shared effects point at the same coordinates in all three predictors
  const auto& p = hm.test[0];
  CHECK(p.z.entries[1].col == p.c.entries[1].col);
  CHECK(p.z.entries[2].col == p.b.entries[2].col);
  CHECK(p.c.entries[1].scale_slot == m.hyper_index("beta1_c"));
  CHECK(p.b.entries[2].scale_slot == m.hyper_index("beta2_b"));

  cfg.variant = ModelVariant::M4;
  const auto m4 = assemble(in, cfg);
  CHECK(m4.model.hypers().size() == 13);
  CHECK(m4.model.block_index("r_zc") < 0);
  CHECK(m4.model.dim() == expected - 20);
  cfg.variant = ModelVariant::M2;
  const auto m2 = assemble(in, cfg);
  CHECK(m2.model.hyper_index("shape") >= 0);
  CHECK(m2.model.area_lik == LikKind::Gamma);

  auto bad = in;
  bad.unit_district.pop_back();
  CHECK_THROWS_AS(assemble(bad, cfg), DimensionError);
  bad = in;
  bad.train[0].unit = 9;
  CHECK_THROWS_AS(assemble(bad, cfg), DimensionError);
}

TEST_CASE("model and fit JSON round trips reproduce predictive draws exactly") {
  const auto in = toy_inputs(5);
  HurdleConfig cfg;
  cfg.n_bins = 4;
  const auto hm = assemble(in, cfg);
  GridConfig g;
  g.strategy = GridStrategy::ModeOnly;
  g.max_bfgs_iter = 3;
  const Fit fit = hyper_grid(hm.model, g);
  const std::string mj = model_to_json(hm.model);
  const LatentModel back = model_from_json(mj);
  CHECK(model_to_json(back) == mj);
  const std::string fj = fit_to_json(fit);
  const Fit fit2 = fit_from_json(fj, back);
  CHECK(fit_to_json(fit2) == fj);
  const auto a = posterior_predictive(hm.model, fit, hm.test, 50, 77);
  const auto b = posterior_predictive(back, fit2, hm.test, 50, 77);
  CHECK(a.count == b.count);
  CHECK(a.area == b.area);
  CHECK(a.z == b.z);
  CHECK_THROWS_AS(model_from_json("{\"format\": \"other\"}"), ConfigError);
}
