#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "firecast/boosting.hpp"
#include "firecast/errors.hpp"

namespace firecast::gbm {

double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  const double g = gl + gr, h = hl + hr;
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma;
}

int RegressionTree::leaf_index(std::span<const double> x) const {
  int j = 0;
  while (!nodes[j].is_leaf()) {
    const auto& n = nodes[j];
    const double v = x[n.feature];
    const bool left = std::isnan(v) ? n.default_left : v < n.threshold;
    j = left ? n.left : n.right;
  }
  return j;
}

int RegressionTree::n_leaves() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    best = std::max(best, d[j]);
    if (!nodes[j].is_leaf()) {
      d[nodes[j].left] = d[j] + 1;
      d[nodes[j].right] = d[j] + 1;
    }
  }
  return best;
}

void RegressionTree::validate() const {
  if (nodes.empty()) throw DomainError("tree has no nodes");
  const int n = static_cast<int>(nodes.size());
  std::vector<int> parents(n, 0);
  for (const auto& node : nodes) {
    if (node.is_leaf()) continue;
    if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n)
      throw DomainError("tree child index out of range");
    ++parents[node.left];
    ++parents[node.right];
  }
  if (parents[0] != 0) throw DomainError("tree root has a parent");
  for (int j = 1; j < n; ++j)
    if (parents[j] != 1) throw DomainError("tree node without exactly one parent");
}

namespace {

struct NodeStats {
  double g = 0.0, h = 0.0, count = 0.0;
};

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  bool default_left = false;
};

struct ScanState {
  NodeStats left;   // non-missing rows seen so far
  NodeStats miss;   // missing rows of this feature
  double prev = 0.0;
  bool seen = false;
};

double midpoint(double a, double b) {
  const double m = a + 0.5 * (b - a);
  return m > a ? m : b;
}

}  // namespace

RegressionTree grow_tree(const TreeInput& in, const BoostConfig& cfg) {
  if (!in.x) throw ParameterError("grow_tree: no feature matrix");
  const Eigen::MatrixXd& x = *in.x;
  const int n_rows = static_cast<int>(x.rows());
  if (static_cast<int>(in.gh.size()) != n_rows) throw DimensionError("grow_tree: gradient count mismatch");

  std::vector<int> rows = in.rows;
  if (rows.empty()) {
    rows.resize(n_rows);
    std::iota(rows.begin(), rows.end(), 0);
  }
  if (rows.empty()) throw DomainError("grow_tree: no rows");
  std::vector<int> features = in.features;
  if (features.empty()) {
    features.resize(x.cols());
    std::iota(features.begin(), features.end(), 0);
  }
  const double lambda = cfg.reg_lambda, gamma = cfg.reg_gamma;

  // node of every participating row, -1 for rows outside the sample or in finished leaves
  std::vector<int> pos(n_rows, -1);
  for (int r : rows) pos[r] = 0;

  // per-feature row orders, sorted by value; missing rows kept apart
  std::vector<std::vector<int>> order(features.size()), missing(features.size());
  for (std::size_t fi = 0; fi < features.size(); ++fi) {
    const int f = features[fi];
    for (int r : rows) (std::isnan(x(r, f)) ? missing[fi] : order[fi]).push_back(r);
    std::stable_sort(order[fi].begin(), order[fi].end(),
                     [&](int a, int b) { return x(a, f) < x(b, f); });
  }

  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<NodeStats> stats(1);
  for (int r : rows) {
    stats[0].g += in.gh[r].g;
    stats[0].h += in.gh[r].h;
    stats[0].count += 1.0;
  }

  auto make_leaf = [&](int j) {
    auto& node = tree.nodes[j];
    node.feature = -1;
    node.weight = -stats[j].g / (stats[j].h + lambda);
    node.cover = stats[j].count;
  };

  std::vector<int> level{0};
  for (int depth = 0; !level.empty(); ++depth) {
    if (depth >= cfg.max_depth) {
      for (int j : level) make_leaf(j);
      break;
    }
    std::vector<Candidate> best(tree.nodes.size());
    std::vector<int> slot(tree.nodes.size(), -1);
    for (std::size_t k = 0; k < level.size(); ++k) slot[level[k]] = static_cast<int>(k);

    std::vector<ScanState> scan(level.size());
    for (std::size_t fi = 0; fi < features.size(); ++fi) {
      const int f = features[fi];
      for (auto& s : scan) s = ScanState{};
      for (int r : missing[fi]) {
        const int j = pos[r];
        if (j < 0 || slot[j] < 0) continue;
        auto& m = scan[slot[j]].miss;
        m.g += in.gh[r].g;
        m.h += in.gh[r].h;
        m.count += 1.0;
      }
      for (int r : order[fi]) {
        const int j = pos[r];
        if (j < 0 || slot[j] < 0) continue;
        auto& s = scan[slot[j]];
        const double v = x(r, f);
        if (s.seen && v > s.prev) {
          const NodeStats& tot = stats[j];
          const double thr = midpoint(s.prev, v);
          // missing rows to the right, then to the left
          for (int dir = 0; dir < (s.miss.count > 0 ? 2 : 1); ++dir) {
            NodeStats l = s.left;
            if (dir == 1) {
              l.g += s.miss.g;
              l.h += s.miss.h;
            }
            const double gr = tot.g - l.g, hr = tot.h - l.h;
            if (l.h < cfg.min_child_weight || hr < cfg.min_child_weight) continue;
            const double gain = split_gain(l.g, l.h, gr, hr, lambda, gamma);
            if (gain > best[j].gain) best[j] = {gain, f, thr, dir == 1};
          }
        }
        s.left.g += in.gh[r].g;
        s.left.h += in.gh[r].h;
        s.left.count += 1.0;
        s.prev = v;
        s.seen = true;
      }
    }

    std::vector<int> next;
    for (int j : level) {
      const Candidate c = best[j];
      if (c.feature < 0 || !(c.gain > 0.0)) {
        make_leaf(j);
        continue;
      }
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      stats.resize(tree.nodes.size());
      auto& node = tree.nodes[j];
      node.feature = c.feature;
      node.threshold = c.threshold;
      node.default_left = c.default_left;
      node.left = l;
      node.right = l + 1;
      node.gain = c.gain;
      node.cover = stats[j].count;
      node.weight = -stats[j].g / (stats[j].h + lambda);
      next.push_back(l);
      next.push_back(l + 1);
    }
    // route rows to the new children and accumulate their sums
    for (int r : rows) {
      const int j = pos[r];
      if (j < 0) continue;
      const auto& node = tree.nodes[j];
      if (node.is_leaf()) {
        pos[r] = -1;
        continue;
      }
      const double v = x(r, node.feature);
      const bool left = std::isnan(v) ? node.default_left : v < node.threshold;
      const int child = left ? node.left : node.right;
      pos[r] = child;
      stats[child].g += in.gh[r].g;
      stats[child].h += in.gh[r].h;
      stats[child].count += 1.0;
    }
    level = std::move(next);
  }
  return tree;
}

}  // namespace firecast::gbm
