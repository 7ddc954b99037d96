#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace firecast::gbm {

/// SquaredError uses an identity link; the other losses a log link.
enum class Loss { Poisson, Tweedie, SquaredError };

struct GradHess {
  double g;
  double h;
};

struct LossSpec {
  Loss loss = Loss::Poisson;
  double tweedie_power = 1.5;

  void validate() const;
  GradHess grad_hess(double y, double raw) const;
  double inverse_link(double raw) const;
  double link(double mean) const;
  /// Mean deviance of predictions on the response scale.
  double mean_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& pred) const;
  void check_target(double y) const;
};

GradHess loss_grad_hess(double y, double raw, const LossSpec& spec);
double poisson_deviance(double y, double mu);
double tweedie_deviance(double y, double mu, double k);

struct BoostConfig {
  int n_trees = 100;
  double learning_rate = 0.1;
  int max_depth = 4;
  double min_child_weight = 1.0;
  double reg_lambda = 1.0;
  double reg_gamma = 0.0;
  LossSpec loss{};
  double row_subsample = 1.0;
  double col_subsample = 1.0;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x < threshold goes left
  bool default_left = true;
  int left = -1;
  int right = -1;
  double weight = 0.0;  // leaf value, before shrinkage
  double cover = 0.0;   // training rows reaching the node
  double gain = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // root at 0

  /// Index of the leaf reached by x; NaN follows the default direction.
  int leaf_index(std::span<const double> x) const;
  double value(std::span<const double> x) const { return nodes[leaf_index(x)].weight; }
  int n_leaves() const;
  int depth() const;
  void validate() const;
};

/// Rows for a single tree: features (rows x cols, NaN for missing) and per-row gradients.
struct TreeInput {
  const Eigen::MatrixXd* x = nullptr;
  std::vector<GradHess> gh;     // indexed by row of x
  std::vector<int> rows;        // rows taking part (all rows when empty)
  std::vector<int> features;    // candidate features (all when empty)
};

RegressionTree grow_tree(const TreeInput& in, const BoostConfig& cfg);

/// Second-order split gain for the given child sums.
double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma);

struct TrainTrace {
  std::vector<double> deviance;  // training mean deviance after each round, index 0 = base score
};

struct TreeEnsemble {
  std::vector<RegressionTree> trees;
  double base_score = 0.0;
  double learning_rate = 1.0;
  LossSpec loss{};
  std::vector<std::string> feature_names;
  std::size_t n_features = 0;

  double predict_raw(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return loss.inverse_link(predict_raw(x)); }
  Eigen::VectorXd predict_raw(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

TreeEnsemble train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const BoostConfig& cfg,
                   std::uint64_t seed, const std::vector<std::string>& feature_names = {},
                   TrainTrace* trace = nullptr);

struct CvResult {
  std::vector<int> fold;                  // fold of each row
  std::vector<double> cv_deviance;        // mean OOF deviance per grid entry
  std::size_t best = 0;                   // index into the grid
  Eigen::VectorXd oof;                    // OOF predictions of the selected config
  TreeEnsemble final_model;               // selected config refitted on all rows
};

/// Random fold labels 0..n_folds-1 with sizes differing by at most one.
std::vector<int> assign_folds(std::size_t n_rows, int n_folds, std::uint64_t seed);

/// Cross-validated grid search. Deviance is measured with `score_loss`
/// (defaults to the loss of the first grid entry).
CvResult superlearner_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const std::vector<BoostConfig>& grid, int n_folds, std::uint64_t seed,
                         const std::vector<std::string>& feature_names = {},
                         std::optional<LossSpec> score_loss = std::nullopt);

struct Attribution {
  std::vector<double> phi;
  double base_value = 0.0;
};

/// Path-dependent TreeSHAP on the raw-score scale: base_value + sum(phi) = predict_raw(x).
Attribution shap_values(const TreeEnsemble& model, std::span<const double> x);

/// Exact Shapley values by enumerating feature subsets (at most 20 features).
Attribution shap_values_bruteforce(const TreeEnsemble& model, std::span<const double> x);

/// Expected raw score of a tree when only the features in `known` are fixed to x,
/// averaging the rest by training cover.
double tree_conditional_expectation(const RegressionTree& tree, std::span<const double> x,
                                    const std::vector<bool>& known);

/// Mean absolute SHAP value per feature over the rows of x.
std::vector<double> mean_abs_shap(const TreeEnsemble& model, const Eigen::MatrixXd& x);

std::string to_json(const TreeEnsemble& model);
TreeEnsemble ensemble_from_json(const std::string& text);

}  // namespace firecast::gbm
