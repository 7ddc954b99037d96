#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "firecast/errors.hpp"
#include "firecast/latent.hpp"

namespace firecast::latent {

Graph Graph::from_edges(std::size_t n, std::vector<std::pair<int, int>> edges) {
  Graph g;
  g.n = n;
  for (auto& [a, b] : edges) {
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n)
      throw DimensionError("graph: edge (" + std::to_string(a) + ", " + std::to_string(b) +
                           ") outside 0.." + std::to_string(n) + "-1");
    if (a == b) throw ParameterError("graph: self loop at node " + std::to_string(a));
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);
  return g;
}

Graph Graph::lattice(int rows, int cols) {
  if (rows < 1 || cols < 1) throw ParameterError("lattice: rows and cols must be positive");
  std::vector<std::pair<int, int>> e;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      if (c + 1 < cols) e.emplace_back(i, i + 1);
      if (r + 1 < rows) e.emplace_back(i, i + cols);
    }
  return from_edges(static_cast<std::size_t>(rows * cols), std::move(e));
}

std::vector<int> Graph::degree() const {
  std::vector<int> d(n, 0);
  for (const auto& [a, b] : edges) {
    ++d[a];
    ++d[b];
  }
  return d;
}

std::vector<int> Graph::components() const {
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : edges) {
    const int ra = find(a), rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  // labels in order of first appearance
  std::vector<int> label(n, -1), out(n);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int r = find(static_cast<int>(i));
    if (label[r] < 0) label[r] = next++;
    out[i] = label[r];
  }
  return out;
}

int Graph::n_components() const {
  const auto c = components();
  return c.empty() ? 0 : *std::max_element(c.begin(), c.end()) + 1;
}

SpMat Graph::icar_structure() const {
  std::vector<Eigen::Triplet<double>> t;
  const auto d = degree();
  for (std::size_t i = 0; i < n; ++i) t.emplace_back(i, i, d[i]);
  for (const auto& [a, b] : edges) {
    t.emplace_back(a, b, -1.0);
    t.emplace_back(b, a, -1.0);
  }
  SpMat m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SpMat rw1_structure(int n) {
  if (n < 2) throw ParameterError("rw1: need at least two bins");
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i + 1 < n; ++i) {
    t.emplace_back(i, i, 1.0);
    t.emplace_back(i + 1, i + 1, 1.0);
    t.emplace_back(i, i + 1, -1.0);
    t.emplace_back(i + 1, i, -1.0);
  }
  SpMat m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

Eigen::MatrixXd constrained_covariance(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& C) {
  // Sigma = V (V' Q V)^-1 V' with V an orthonormal basis of null(C)
  const Eigen::Index n = Q.rows();
  if (C.rows() == 0) return Q.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
  const Eigen::Index k = svd.rank();
  const Eigen::MatrixXd V = svd.matrixV().rightCols(n - k);
  const Eigen::MatrixXd inner = V.transpose() * Q * V;
  return V * inner.ldlt().solve(V.transpose());
}

ScaledIcar build_icar_scaled(const Graph& g) {
  if (g.n == 0) throw ParameterError("icar: empty graph");
  ScaledIcar out;
  out.component = g.components();
  const int n_comp = *std::max_element(out.component.begin(), out.component.end()) + 1;
  out.scale.assign(n_comp, 1.0);
  out.singleton.assign(n_comp, false);
  const Eigen::MatrixXd S = Eigen::MatrixXd(g.icar_structure());

  std::vector<std::vector<int>> members(n_comp);
  for (std::size_t i = 0; i < g.n; ++i) members[out.component[i]].push_back(static_cast<int>(i));

  std::vector<Eigen::Triplet<double>> t;
  std::vector<int> constrained;
  for (int c = 0; c < n_comp; ++c) {
    const auto& m = members[c];
    if (m.size() == 1) {
      out.singleton[c] = true;
      t.emplace_back(m[0], m[0], 1.0);
      out.cov_eigen.push_back(1.0);
      continue;
    }
    constrained.push_back(c);
    const Eigen::Index k = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXd sub(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) sub(i, j) = S(m[i], m[j]);
    const Eigen::MatrixXd cov = constrained_covariance(sub, Eigen::MatrixXd::Ones(1, k));
    double mean_log = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) mean_log += std::log(cov(i, i));
    mean_log /= static_cast<double>(k);
    const double scale = std::exp(mean_log);  // scaled variances = cov / scale
    out.scale[c] = scale;
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j)
        if (sub(i, j) != 0.0) t.emplace_back(m[i], m[j], scale * sub(i, j));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov / scale);
    // the constant vector is the single null mode; keep the rest
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + k);
    std::sort(ev.begin(), ev.end());
    out.cov_eigen.insert(out.cov_eigen.end(), ev.begin() + 1, ev.end());
  }
  out.graph = g;
  out.R.resize(g.n, g.n);
  out.R.setFromTriplets(t.begin(), t.end());
  out.constraints = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(constrained.size()), g.n);
  for (std::size_t r = 0; r < constrained.size(); ++r)
    for (int i : members[constrained[r]]) out.constraints(r, i) = 1.0;
  std::sort(out.cov_eigen.begin(), out.cov_eigen.end());
  return out;
}

}  // namespace firecast::latent
