#include <cmath>
#include <string>

#include "firecast/boosting.hpp"
#include "firecast/errors.hpp"

namespace firecast::gbm {

namespace {

// One element of the decision path: feature, fraction of cover kept when the
// feature is unknown (zero), indicator that x follows this branch (one), and
// the permutation weight.
struct PathElement {
  int feature;
  double zero;
  double one;
  double weight;
};

using Path = std::vector<PathElement>;

void extend_path(Path& m, double zero, double one, int feature) {
  const std::size_t d = m.size();
  m.push_back({feature, zero, one, d == 0 ? 1.0 : 0.0});
  const double dp1 = static_cast<double>(d + 1);
  for (std::size_t ii = d; ii-- > 0;) {
    m[ii + 1].weight += one * m[ii].weight * static_cast<double>(ii + 1) / dp1;
    m[ii].weight = zero * m[ii].weight * static_cast<double>(d - ii) / dp1;
  }
}

void unwind_path(Path& m, std::size_t idx) {
  const std::size_t d = m.size() - 1;
  const double one = m[idx].one, zero = m[idx].zero;
  const double dp1 = static_cast<double>(d + 1);
  double next = m[d].weight;
  for (std::size_t ii = d; ii-- > 0;) {
    if (one != 0.0) {
      const double tmp = m[ii].weight;
      m[ii].weight = next * dp1 / (static_cast<double>(ii + 1) * one);
      next = tmp - m[ii].weight * zero * static_cast<double>(d - ii) / dp1;
    } else {
      m[ii].weight = m[ii].weight * dp1 / (zero * static_cast<double>(d - ii));
    }
  }
  for (std::size_t ii = idx; ii < d; ++ii) {
    m[ii].feature = m[ii + 1].feature;
    m[ii].zero = m[ii + 1].zero;
    m[ii].one = m[ii + 1].one;
  }
  m.pop_back();
}

double unwound_sum(const Path& m, std::size_t idx) {
  const std::size_t d = m.size() - 1;
  const double one = m[idx].one, zero = m[idx].zero;
  const double dp1 = static_cast<double>(d + 1);
  double next = m[d].weight, total = 0.0;
  for (std::size_t ii = d; ii-- > 0;) {
    if (one != 0.0) {
      const double tmp = next * dp1 / (static_cast<double>(ii + 1) * one);
      total += tmp;
      next = m[ii].weight - tmp * zero * static_cast<double>(d - ii) / dp1;
    } else {
      total += m[ii].weight / zero / (static_cast<double>(d - ii) / dp1);
    }
  }
  return total;
}

void recurse(const RegressionTree& tree, std::span<const double> x, std::vector<double>& phi,
             double scale, int j, Path m, double zero, double one, int feature) {
  extend_path(m, zero, one, feature);
  const TreeNode& node = tree.nodes[j];
  if (node.is_leaf()) {
    for (std::size_t i = 1; i < m.size(); ++i) {
      const double w = unwound_sum(m, i);
      phi[m[i].feature] += w * (m[i].one - m[i].zero) * node.weight * scale;
    }
    return;
  }
  const double v = x[node.feature];
  const bool go_left = std::isnan(v) ? node.default_left : v < node.threshold;
  const int hot = go_left ? node.left : node.right;
  const int cold = go_left ? node.right : node.left;
  double in_zero = 1.0, in_one = 1.0;
  for (std::size_t k = 1; k < m.size(); ++k) {
    if (m[k].feature == node.feature) {
      in_zero = m[k].zero;
      in_one = m[k].one;
      unwind_path(m, k);
      break;
    }
  }
  const double cover = node.cover;
  recurse(tree, x, phi, scale, hot, m, tree.nodes[hot].cover / cover * in_zero, in_one, node.feature);
  recurse(tree, x, phi, scale, cold, m, tree.nodes[cold].cover / cover * in_zero, 0.0, node.feature);
}

double expected_value(const RegressionTree& tree, int j) {
  const auto& n = tree.nodes[j];
  if (n.is_leaf()) return n.weight;
  return (tree.nodes[n.left].cover * expected_value(tree, n.left) +
          tree.nodes[n.right].cover * expected_value(tree, n.right)) /
         n.cover;
}

void check_dims(const TreeEnsemble& model, std::span<const double> x) {
  if (x.size() != model.n_features)
    throw DimensionError("shap: expected " + std::to_string(model.n_features) + " features, got " +
                         std::to_string(x.size()));
}

double ensemble_expectation(const TreeEnsemble& model) {
  double s = 0.0;
  for (const auto& t : model.trees) s += expected_value(t, 0);
  return model.base_score + model.learning_rate * s;
}

}  // namespace

double tree_conditional_expectation(const RegressionTree& tree, std::span<const double> x,
                                    const std::vector<bool>& known) {
  auto go = [&](auto&& self, int j) -> double {
    const auto& n = tree.nodes[j];
    if (n.is_leaf()) return n.weight;
    if (known[n.feature]) {
      const double v = x[n.feature];
      const bool left = std::isnan(v) ? n.default_left : v < n.threshold;
      return self(self, left ? n.left : n.right);
    }
    return (tree.nodes[n.left].cover * self(self, n.left) +
            tree.nodes[n.right].cover * self(self, n.right)) /
           n.cover;
  };
  return go(go, 0);
}

Attribution shap_values(const TreeEnsemble& model, std::span<const double> x) {
  check_dims(model, x);
  Attribution out;
  out.phi.assign(model.n_features, 0.0);
  out.base_value = ensemble_expectation(model);
  for (const auto& t : model.trees) recurse(t, x, out.phi, model.learning_rate, 0, Path{}, 1.0, 1.0, -1);
  return out;
}

Attribution shap_values_bruteforce(const TreeEnsemble& model, std::span<const double> x) {
  check_dims(model, x);
  const std::size_t p = model.n_features;
  if (p > 20) throw ParameterError("brute-force Shapley values support at most 20 features");
  Attribution out;
  out.phi.assign(p, 0.0);
  out.base_value = ensemble_expectation(model);

  std::vector<double> fact(p + 1, 1.0);
  for (std::size_t i = 1; i <= p; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  auto value = [&](std::uint32_t mask) {
    std::vector<bool> known(p);
    for (std::size_t j = 0; j < p; ++j) known[j] = (mask >> j) & 1u;
    double s = 0.0;
    for (const auto& t : model.trees) s += tree_conditional_expectation(t, x, known);
    return model.learning_rate * s;
  };
  const std::uint32_t n_masks = 1u << p;
  std::vector<double> v(n_masks);
  for (std::uint32_t mask = 0; mask < n_masks; ++mask) v[mask] = value(mask);
  for (std::size_t j = 0; j < p; ++j) {
    const std::uint32_t bit = 1u << j;
    for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      const int s = __builtin_popcount(mask);
      const double w = fact[s] * fact[p - s - 1] / fact[p];
      out.phi[j] += w * (v[mask | bit] - v[mask]);
    }
  }
  return out;
}

std::vector<double> mean_abs_shap(const TreeEnsemble& model, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.cols()) != model.n_features)
    throw DimensionError("shap: feature count mismatch");
  std::vector<double> total(model.n_features, 0.0);
  std::vector<double> row(model.n_features);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (std::size_t c = 0; c < model.n_features; ++c) row[c] = x(i, c);
    const auto a = shap_values(model, row);
    for (std::size_t c = 0; c < model.n_features; ++c) total[c] += std::abs(a.phi[c]);
  }
  if (x.rows() > 0)
    for (auto& t : total) t /= static_cast<double>(x.rows());
  return total;
}

}  // namespace firecast::gbm
