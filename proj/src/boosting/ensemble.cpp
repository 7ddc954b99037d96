#include <algorithm>
#include <cmath>
#include <string>

#include "firecast/boosting.hpp"
#include "firecast/errors.hpp"
#include "firecast/random.hpp"

namespace firecast::gbm {

namespace {

// Floor on the mean used for the log-link base score of an all-zero target.
constexpr double kMinBaseMean = 1e-6;

std::vector<int> sample_subset(std::size_t n, double frac, std::mt19937_64& rng) {
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(frac * n)));
  auto p = permutation(n, rng);
  p.resize(std::min(k, n));
  std::sort(p.begin(), p.end());
  return p;
}

}  // namespace

void BoostConfig::validate() const {
  loss.validate();
  if (n_trees < 0) throw ParameterError("boosting: n_trees must be >= 0");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw ParameterError("boosting: learning_rate must lie in (0, 1]");
  if (max_depth < 0) throw ParameterError("boosting: max_depth must be >= 0");
  if (!(min_child_weight >= 0.0)) throw ParameterError("boosting: min_child_weight must be >= 0");
  if (!(reg_lambda >= 0.0)) throw ParameterError("boosting: reg_lambda must be >= 0");
  if (!(reg_gamma >= 0.0)) throw ParameterError("boosting: reg_gamma must be >= 0");
  if (!(row_subsample > 0.0 && row_subsample <= 1.0))
    throw ParameterError("boosting: row_subsample must lie in (0, 1]");
  if (!(col_subsample > 0.0 && col_subsample <= 1.0))
    throw ParameterError("boosting: col_subsample must lie in (0, 1]");
}

double TreeEnsemble::predict_raw(std::span<const double> x) const {
  if (x.size() != n_features)
    throw DimensionError("predict: expected " + std::to_string(n_features) + " features, got " +
                         std::to_string(x.size()));
  double s = 0.0;
  for (const auto& t : trees) s += t.value(x);
  return base_score + learning_rate * s;
}

Eigen::VectorXd TreeEnsemble::predict_raw(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != n_features)
    throw DimensionError("predict: feature count mismatch");
  Eigen::VectorXd out(x.rows());
  std::vector<double> row(n_features);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (std::size_t c = 0; c < n_features; ++c) row[c] = x(i, c);
    out(i) = predict_raw(row);
  }
  return out;
}

Eigen::VectorXd TreeEnsemble::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd raw = predict_raw(x);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = loss.inverse_link(raw(i));
  return raw;
}

TreeEnsemble train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const BoostConfig& cfg,
                   std::uint64_t seed, const std::vector<std::string>& feature_names,
                   TrainTrace* trace) {
  cfg.validate();
  if (x.rows() == 0) throw DomainError("train: empty dataset");
  if (x.rows() != y.size()) throw DimensionError("train: feature rows and targets differ");
  if (!feature_names.empty() && feature_names.size() != static_cast<std::size_t>(x.cols()))
    throw DimensionError("train: feature name count mismatch");
  for (Eigen::Index i = 0; i < y.size(); ++i) cfg.loss.check_target(y(i));

  TreeEnsemble m;
  m.loss = cfg.loss;
  m.learning_rate = cfg.learning_rate;
  m.n_features = static_cast<std::size_t>(x.cols());
  m.feature_names = feature_names;
  if (m.feature_names.empty())
    for (Eigen::Index c = 0; c < x.cols(); ++c) m.feature_names.push_back("f" + std::to_string(c));
  const double mean = y.mean();
  m.base_score = cfg.loss.loss == Loss::SquaredError ? mean : std::log(std::max(mean, kMinBaseMean));

  const std::size_t n = static_cast<std::size_t>(x.rows());
  Eigen::VectorXd raw = Eigen::VectorXd::Constant(x.rows(), m.base_score);
  auto record = [&] {
    if (!trace) return;
    Eigen::VectorXd mu = raw;
    for (Eigen::Index i = 0; i < mu.size(); ++i) mu(i) = cfg.loss.inverse_link(mu(i));
    trace->deviance.push_back(cfg.loss.mean_deviance(y, mu));
  };
  record();

  std::mt19937_64 rng(seed);
  TreeInput in;
  in.x = &x;
  in.gh.resize(n);
  for (int round = 0; round < cfg.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) in.gh[i] = cfg.loss.grad_hess(y(i), raw(i));
    in.rows = cfg.row_subsample < 1.0 ? sample_subset(n, cfg.row_subsample, rng) : std::vector<int>{};
    in.features = cfg.col_subsample < 1.0 ? sample_subset(x.cols(), cfg.col_subsample, rng)
                                          : std::vector<int>{};
    RegressionTree tree = grow_tree(in, cfg);
    std::vector<double> row(m.n_features);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < m.n_features; ++c) row[c] = x(i, c);
      raw(i) += cfg.learning_rate * tree.value(row);
    }
    m.trees.push_back(std::move(tree));
    record();
  }
  return m;
}

}  // namespace firecast::gbm
