#include <limits>
#include <string>

#include "firecast/boosting.hpp"
#include "firecast/errors.hpp"
#include "firecast/random.hpp"

namespace firecast::gbm {

std::vector<int> assign_folds(std::size_t n_rows, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw ParameterError("cross-validation needs at least two folds");
  if (static_cast<std::size_t>(n_folds) > n_rows)
    throw ParameterError("cross-validation: " + std::to_string(n_folds) + " folds exceed " +
                         std::to_string(n_rows) + " rows");
  std::mt19937_64 rng(seed);
  const auto perm = permutation(n_rows, rng);
  std::vector<int> fold(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) fold[perm[i]] = static_cast<int>(i % n_folds);
  return fold;
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<int>& rows) {
  Eigen::MatrixXd out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = x.row(rows[i]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<int>& rows) {
  Eigen::VectorXd out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out(i) = y(rows[i]);
  return out;
}

}  // namespace

CvResult superlearner_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const std::vector<BoostConfig>& grid, int n_folds, std::uint64_t seed,
                         const std::vector<std::string>& feature_names,
                         std::optional<LossSpec> score_loss) {
  if (grid.empty()) throw ParameterError("cross-validation: empty configuration grid");
  for (const auto& c : grid) c.validate();
  if (x.rows() != y.size()) throw DimensionError("cross-validation: rows and targets differ");
  const LossSpec scorer = score_loss.value_or(grid.front().loss);
  scorer.validate();

  CvResult res;
  res.fold = assign_folds(static_cast<std::size_t>(x.rows()), n_folds, seed);
  std::vector<std::vector<int>> train_rows(n_folds), test_rows(n_folds);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (int f = 0; f < n_folds; ++f) (res.fold[i] == f ? test_rows : train_rows)[f].push_back(static_cast<int>(i));

  std::vector<Eigen::MatrixXd> x_train(n_folds), x_test(n_folds);
  std::vector<Eigen::VectorXd> y_train(n_folds);
  for (int f = 0; f < n_folds; ++f) {
    x_train[f] = take_rows(x, train_rows[f]);
    x_test[f] = take_rows(x, test_rows[f]);
    y_train[f] = take(y, train_rows[f]);
  }

  double best_dev = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    Eigen::VectorXd oof(x.rows());
    for (int f = 0; f < n_folds; ++f) {
      const auto model = train(x_train[f], y_train[f], grid[g], derive_seed(seed, 1000 * g + f), feature_names);
      const Eigen::VectorXd p = model.predict(x_test[f]);
      for (std::size_t i = 0; i < test_rows[f].size(); ++i) oof(test_rows[f][i]) = p(i);
    }
    const double dev = scorer.mean_deviance(y, oof);
    res.cv_deviance.push_back(dev);
    if (dev < best_dev) {
      best_dev = dev;
      res.best = g;
      res.oof = oof;
    }
  }
  res.final_model = train(x, y, grid[res.best], derive_seed(seed, 999983), feature_names);
  return res;
}

}  // namespace firecast::gbm
