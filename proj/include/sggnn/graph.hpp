#pragma once

#include "sggnn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace sggnn {

struct Edge {
  int i = 0;
  int j = 0;
  double weight = 1.0;
};

/// Undirected weighted communication graph. Edges are stored once with i < j.
class Graph {
 public:
  Graph() = default;

  Graph(int n_agents, std::vector<Edge> edges) : n_(n_agents), edges_(std::move(edges)) {
    require(n_ >= 0, "graph: negative agent count");
    for (auto& e : edges_) {
      require(e.i >= 0 && e.j >= 0 && e.i < n_ && e.j < n_, "graph: edge endpoint out of range");
      require(e.i != e.j, "graph: self-loop");
      require(e.weight > 0.0 && std::isfinite(e.weight), "graph: edge weight must be positive");
      if (e.i > e.j) std::swap(e.i, e.j);
    }
    std::sort(edges_.begin(), edges_.end(),
              [](const Edge& a, const Edge& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
    for (std::size_t k = 1; k < edges_.size(); ++k) {
      require(edges_[k].i != edges_[k - 1].i || edges_[k].j != edges_[k - 1].j,
              "graph: duplicate edge");
    }
  }

  int n_agents() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }

  Matrix adjacency() const {
    Matrix a = Matrix::Zero(n_, n_);
    for (const auto& e : edges_) {
      a(e.i, e.j) = e.weight;
      a(e.j, e.i) = e.weight;
    }
    return a;
  }

  std::vector<double> degrees() const {
    std::vector<double> d(static_cast<std::size_t>(n_), 0.0);
    for (const auto& e : edges_) {
      d[static_cast<std::size_t>(e.i)] += e.weight;
      d[static_cast<std::size_t>(e.j)] += e.weight;
    }
    return d;
  }

  bool has_edge(int i, int j) const {
    if (i > j) std::swap(i, j);
    return std::any_of(edges_.begin(), edges_.end(),
                       [&](const Edge& e) { return e.i == i && e.j == j; });
  }

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
};

enum class SupportKind { adjacency, laplacian, normalized_laplacian };

inline std::string to_string(SupportKind kind) {
  switch (kind) {
    case SupportKind::adjacency: return "adjacency";
    case SupportKind::laplacian: return "laplacian";
    case SupportKind::normalized_laplacian: return "normalized_laplacian";
  }
  return "unknown";
}

inline SupportKind support_kind_from_string(const std::string& name) {
  if (name == "adjacency") return SupportKind::adjacency;
  if (name == "laplacian") return SupportKind::laplacian;
  if (name == "normalized_laplacian") return SupportKind::normalized_laplacian;
  throw Error("unknown support kind '" + name + "'");
}

struct SupportMatrix {
  Matrix entries;
  SupportKind kind = SupportKind::normalized_laplacian;

  Eigen::Index size() const { return entries.rows(); }
};

/// Binary proximity graph: edge (i, j) iff 0 < |r_i - r_j| <= radius (closed ball).
inline Graph build_proximity_graph(const Matrix& positions, double radius) {
  require(radius > 0.0, "proximity graph: radius must be positive");
  require(positions.cols() == 2, "proximity graph: positions must be N x 2");
  require(positions.allFinite(), "proximity graph: non-finite positions");
  const int n = static_cast<int>(positions.rows());
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = (positions.row(i) - positions.row(j)).norm();
      if (d == 0.0) throw Error("agent overlap");
      if (d <= radius) edges.push_back({i, j, 1.0});
    }
  }
  return Graph(n, std::move(edges));
}

inline SupportMatrix support_matrix(const Graph& graph, SupportKind kind) {
  const Matrix a = graph.adjacency();
  const auto deg = graph.degrees();
  const Eigen::Index n = a.rows();
  Matrix lap = -a;
  for (Eigen::Index i = 0; i < n; ++i) lap(i, i) = deg[static_cast<std::size_t>(i)];

  switch (kind) {
    case SupportKind::adjacency: return {a, kind};
    case SupportKind::laplacian: return {lap, kind};
    case SupportKind::normalized_laplacian: {
      // Pseudo-inverse of D^{1/2}: isolated nodes get a zero row and column.
      Eigen::VectorXd inv_sqrt(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = deg[static_cast<std::size_t>(i)];
        inv_sqrt(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
      }
      return {inv_sqrt.asDiagonal() * lap * inv_sqrt.asDiagonal(), kind};
    }
  }
  throw Error("support_matrix: unknown kind");
}

inline Matrix apply_shift(const SupportMatrix& s, const Matrix& x) {
  require(s.entries.cols() == x.rows(), "apply_shift: dimension mismatch");
  return s.entries * x;
}

/// Upper bound on inf_norm([I, S, ..., S^K]) given inf_norm(S) <= s_max.
inline double stacked_shift_norm_bound(double s_max, int k_order) {
  require(s_max >= 0.0, "stacked shift bound: s_max must be nonnegative");
  require(k_order >= 0, "stacked shift bound: negative order");
  double sum = 0.0;
  double power = 1.0;
  for (int k = 0; k <= k_order; ++k) {
    sum += power;
    power *= s_max;
  }
  return sum;
}

/// [I, S, ..., S^K] as an N x (K+1)N matrix, built by repeated shifts.
inline Matrix stacked_shift(const Matrix& s, int k_order) {
  const Eigen::Index n = s.rows();
  Matrix out(n, n * (k_order + 1));
  Matrix power = Matrix::Identity(n, n);
  for (int k = 0; k <= k_order; ++k) {
    out.middleCols(k * n, n) = power;
    if (k < k_order) power = s * power;
  }
  return out;
}

/// Uniform bound on inf_norm(S) over every graph with at most max_team_size
/// agents. Normalized Laplacian rows sum to 1 + sum_j 1/sqrt(d_i d_j) <=
/// 1 + sqrt(d_i); adjacency is bounded by the team size.
inline double default_support_bound(SupportKind kind, int max_team_size) {
  require(max_team_size >= 1, "support bound: team size must be positive");
  const double n = static_cast<double>(max_team_size);
  switch (kind) {
    case SupportKind::adjacency: return n;
    case SupportKind::laplacian: return 2.0 * (n - 1.0);
    case SupportKind::normalized_laplacian: return 1.0 + std::sqrt(n - 1.0);
  }
  throw Error("support bound: unknown kind");
}

}  // namespace sggnn
