#pragma once

// Reference implementations written from the closed forms and by brute-force
// enumeration. Shared by the unit and acceptance suites; nothing here calls
// into the code under test except for struct definitions.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "firecast/boosting.hpp"
#include "test_support.hpp"

namespace firecast::testing {

using gbm::BoostConfig;
using gbm::GradHess;
using gbm::RegressionTree;
using gbm::TreeEnsemble;

// Reference GPD cdf written directly from the closed form.
inline double ref_gpd_cdf(double y, double sigma, double xi) {
  if (xi == 0.0) return 1.0 - std::exp(-y / sigma);
  return 1.0 - std::pow(1.0 + xi * y / sigma, -1.0 / xi);
}

// Reference eGP density, independent of the library implementation.
inline double ref_egp_pdf(double y, double sigma, double xi, double kappa) {
  const long double z = y / sigma;
  long double base, gpd;
  if (xi == 0.0) {
    base = 1.0L - std::exp(-z);
    gpd = std::exp(-z) / sigma;
  } else {
    base = 1.0L - std::pow(1.0L + xi * z, -1.0L / xi);
    gpd = std::pow(1.0L + xi * z, -1.0L / xi - 1.0L) / sigma;
  }
  return static_cast<double>(kappa * std::pow(base, kappa - 1.0L) * gpd);
}

// Log eGP density evaluated in log space so that both tails stay finite.
inline double ref_egp_log_pdf(double y, double sigma, double xi, double kappa) {
  const double z = y / sigma;
  double log_base, log_gpd;
  if (xi == 0.0) {
    log_base = std::log(-std::expm1(-z));
    log_gpd = -z - std::log(sigma);
  } else {
    const double l = std::log1p(xi * z);
    log_base = std::log(-std::expm1(-l / xi));
    log_gpd = (-1.0 / xi - 1.0) * l - std::log(sigma);
  }
  return std::log(kappa) + (kappa - 1.0) * log_base + log_gpd;
}

// KLD(eGP(kappa) || eGP(1)) by quadrature with an independent density.
inline double numeric_kld_kappa(double kappa, double sigma, double xi) {
  auto integrand = [&](double y) {
    const double lk = ref_egp_log_pdf(y, sigma, xi, kappa);
    if (lk < -700.0) return 0.0;
    return std::exp(lk) * (lk - ref_egp_log_pdf(y, sigma, xi, 1.0));
  };
  return integrate_log_scale(integrand, -80.0, 6.0);
}

// Half deviances written out independently; the gradients are their derivatives in raw score.
inline double half_poisson_deviance(double y, double s) {
  const double mu = std::exp(s);
  return (y > 0 ? y * std::log(y / mu) : 0.0) - (y - mu);
}
inline double half_tweedie_deviance(double y, double s, double k) {
  const double mu = std::exp(s);
  return std::pow(y, 2 - k) / ((1 - k) * (2 - k)) - y * std::pow(mu, 1 - k) / (1 - k) +
         std::pow(mu, 2 - k) / (2 - k);
}

inline std::vector<double> row_of(const Eigen::MatrixXd& x, Eigen::Index i) {
  std::vector<double> r(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) r[c] = x(i, c);
  return r;
}

// --- brute-force tree oracle -------------------------------------------------

struct OracleSplit {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  bool default_left = false;
};

// Enumerates every feature, every cut between consecutive distinct values and
// both routings of missing values, recomputing sums from scratch.
inline OracleSplit oracle_best_split(const Eigen::MatrixXd& x, const std::vector<GradHess>& gh,
                              const std::vector<int>& rows, const BoostConfig& cfg) {
  OracleSplit best;
  for (int f = 0; f < x.cols(); ++f) {
    std::set<double> vals;
    bool any_missing = false;
    for (int r : rows) {
      if (std::isnan(x(r, f))) any_missing = true;
      else vals.insert(x(r, f));
    }
    std::vector<double> v(vals.begin(), vals.end());
    for (std::size_t k = 1; k < v.size(); ++k) {
      const double thr = v[k - 1] + 0.5 * (v[k] - v[k - 1]);
      for (int dir = 0; dir < (any_missing ? 2 : 1); ++dir) {
        double gl = 0, hl = 0, gr = 0, hr = 0;
        for (int r : rows) {
          const double xv = x(r, f);
          const bool left = std::isnan(xv) ? dir == 1 : xv < thr;
          (left ? gl : gr) += gh[r].g;
          (left ? hl : hr) += gh[r].h;
        }
        if (hl < cfg.min_child_weight || hr < cfg.min_child_weight) continue;
        const double g = gl + gr, h = hl + hr;
        const double gain = 0.5 * (gl * gl / (hl + cfg.reg_lambda) + gr * gr / (hr + cfg.reg_lambda) -
                                   g * g / (h + cfg.reg_lambda)) -
                            cfg.reg_gamma;
        if (gain > best.gain + 1e-12) best = {gain, f, thr, dir == 1};
      }
    }
  }
  return best;
}

// Leaf value each row receives from a recursively grown oracle tree.
inline void oracle_tree(const Eigen::MatrixXd& x, const std::vector<GradHess>& gh, const std::vector<int>& rows,
                 const BoostConfig& cfg, int depth, std::vector<double>& leaf_of_row) {
  double g = 0, h = 0;
  for (int r : rows) {
    g += gh[r].g;
    h += gh[r].h;
  }
  const OracleSplit s = depth < cfg.max_depth ? oracle_best_split(x, gh, rows, cfg) : OracleSplit{};
  if (s.feature < 0) {
    for (int r : rows) leaf_of_row[r] = -g / (h + cfg.reg_lambda);
    return;
  }
  std::vector<int> l, rr;
  for (int r : rows) {
    const double xv = x(r, s.feature);
    (std::isnan(xv) ? s.default_left : xv < s.threshold) ? l.push_back(r) : rr.push_back(r);
  }
  oracle_tree(x, gh, l, cfg, depth + 1, leaf_of_row);
  oracle_tree(x, gh, rr, cfg, depth + 1, leaf_of_row);
}

struct RandomData {
  Eigen::MatrixXd x;
  std::vector<GradHess> gh;
};

inline RandomData random_tree_data(std::mt19937_64& rng, int n, int p, bool with_missing) {
  std::uniform_real_distribution<double> u(-1, 1), h(0.2, 2.0);
  std::uniform_int_distribution<int> lev(0, 5);
  std::bernoulli_distribution miss(0.15);
  RandomData d;
  d.x.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < p; ++c) {
      d.x(i, c) = c % 2 == 0 ? u(rng) : lev(rng);  // mix of continuous and tied features
      if (with_missing && miss(rng)) d.x(i, c) = std::numeric_limits<double>::quiet_NaN();
    }
  for (int i = 0; i < n; ++i) d.gh.push_back({u(rng) * 3.0, h(rng)});
  return d;
}

// --- brute-force Shapley oracle ----------------------------------------------

inline double oracle_expectation(const RegressionTree& t, int j, const std::vector<double>& x, unsigned mask) {
  const auto& n = t.nodes[j];
  if (n.feature < 0) return n.weight;
  if (mask & (1u << n.feature)) {
    const double v = x[n.feature];
    const bool left = std::isnan(v) ? n.default_left : v < n.threshold;
    return oracle_expectation(t, left ? n.left : n.right, x, mask);
  }
  const double cl = t.nodes[n.left].cover, cr = t.nodes[n.right].cover;
  return (cl * oracle_expectation(t, n.left, x, mask) + cr * oracle_expectation(t, n.right, x, mask)) /
         (cl + cr);
}

inline std::vector<double> oracle_shapley(const TreeEnsemble& m, const std::vector<double>& x) {
  const int p = static_cast<int>(m.n_features);
  auto value = [&](unsigned mask) {
    double s = 0.0;
    for (const auto& t : m.trees) s += oracle_expectation(t, 0, x, mask);
    return m.learning_rate * s;
  };
  std::vector<double> phi(p, 0.0);
  for (int j = 0; j < p; ++j)
    for (unsigned mask = 0; mask < (1u << p); ++mask) {
      if (mask & (1u << j)) continue;
      const int s = __builtin_popcount(mask);
      const double w = std::tgamma(s + 1.0) * std::tgamma(p - s + 0.0) / std::tgamma(p + 1.0);
      phi[j] += w * (value(mask | (1u << j)) - value(mask));
    }
  return phi;
}

inline double pair_count_auc(const std::vector<int>& y, const std::vector<double>& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        if (s[i] > s[j]) wins += 1.0;
        else if (s[i] == s[j]) wins += 0.5;
      }
  return wins / pairs;
}

// CRPS of a continuous predictive cdf by quadrature of [F(t) - 1(t >= y)]^2.
template <class F>
inline double crps_quadrature(F cdf, double y, double lo, double hi) {
  using firecast::testing::integrate;
  return integrate([&](double t) { return cdf(t) * cdf(t); }, lo, y) +
         integrate([&](double t) { return (1 - cdf(t)) * (1 - cdf(t)); }, y, hi);
}

// Constrained covariance from the KKT system [[Q, C'], [C, 0]]: the top-left
// block of its inverse is the covariance of N(0, Q^-1) restricted to C u = 0.
inline Eigen::MatrixXd kkt_covariance(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& C) {
  const Eigen::Index n = Q.rows(), k = C.rows();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
  K.topLeftCorner(n, n) = Q;
  K.topRightCorner(n, k) = C.transpose();
  K.bottomLeftCorner(k, n) = C;
  const Eigen::MatrixXd inv = K.fullPivLu().inverse();
  return inv.topLeftCorner(n, n);
}

}  // namespace firecast::testing
