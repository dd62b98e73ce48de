#pragma once

#include "shaplm/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace shaplm {

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct WeightedEdge {
  int i = 0;
  int j = 0;
  double weight = 0.0;
};

/// Undirected simple graph on vertices 0..n-1.
class SpatialGraph {
 public:
  SpatialGraph() = default;
  /// Throws on self loops, duplicate undirected edges or out-of-range vertices.
  SpatialGraph(int n, std::vector<WeightedEdge> edges);

  int num_vertices() const { return n_; }
  const std::vector<WeightedEdge>& edges() const { return edges_; }
  bool connected() const { return connected_; }

  /// Same topology, new weights (one per edge, in edge order).
  SpatialGraph with_weights(std::span<const double> weights) const;

 private:
  int n_ = 0;
  std::vector<WeightedEdge> edges_;
  bool connected_ = false;
};

/// Delaunay edges of the locations, weighted by Euclidean length.
SpatialGraph delaunay_graph(std::span<const Point2> locations);

/// A spanning tree with a BFS orientation from `root`.
class SpanningTree {
 public:
  SpanningTree() = default;
  /// Throws unless `edges` has n-1 entries and connects all n vertices.
  SpanningTree(int n, std::vector<std::pair<int, int>> edges, int root = 0);

  int num_vertices() const { return n_; }
  int root() const { return root_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  /// parent[root] == -1.
  const std::vector<int>& parent() const { return parent_; }
  /// Edge index linking v to its parent (-1 for the root).
  const std::vector<int>& parent_edge() const { return parent_edge_; }
  /// Vertices in BFS order from the root.
  const std::vector<int>& bfs_order() const { return order_; }

 private:
  int n_ = 0;
  int root_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<int> parent_;
  std::vector<int> parent_edge_;
  std::vector<int> order_;
};

/// Kruskal with union-find; ties keep edge-list order. Tree edges are listed
/// in acceptance order.
SpanningTree mst(const SpatialGraph& graph);

/// MST under i.i.d. Uniform(0,1) edge weights drawn from `seed`.
SpanningTree random_spanning_tree(const SpatialGraph& graph, std::uint64_t seed);

std::string tree_to_json_text(const SpanningTree& tree);

/// Oriented incidence H of a tree, augmented with n^{-1/2} 1' to the square
/// invertible matrix Htilde. Row l < n-1 of H has +1 at min(i,j) and -1 at
/// max(i,j) of tree edge l; row n-1 of Htilde is the scaled all-ones row.
///
/// Nothing here is dense: Htilde, its inverse and the inverse transpose are
/// applied in O(n) by traversing the tree.
class TreeTransform {
 public:
  TreeTransform() = default;
  explicit TreeTransform(SpanningTree tree);

  const SpanningTree& tree() const { return tree_; }
  int size() const { return tree_.num_vertices(); }

  /// theta = Htilde * beta.
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& beta) const;
  /// beta = Htilde^{-1} * theta.
  Eigen::VectorXd apply_inverse(const Eigen::Ref<const Eigen::VectorXd>& theta) const;
  /// Htilde^{-T} * v, i.e. the inner products of v with every column of Htilde^{-1}.
  Eigen::VectorXd apply_inverse_transpose(const Eigen::Ref<const Eigen::VectorXd>& v) const;

  /// Column l of Htilde^{-1}: for an edge, sign * (1_C - |C|/n) with C the
  /// child-side subtree; for l = n-1, n^{-1/2} 1.
  void inverse_column(int l, Eigen::Ref<Eigen::VectorXd> out) const;

  /// Child endpoint of edge l in the BFS orientation.
  int child_of_edge(int l) const { return edge_child_[l]; }

  Eigen::MatrixXd dense_H() const;
  Eigen::MatrixXd dense_Htilde() const;

 private:
  SpanningTree tree_;
  std::vector<int> edge_child_;
  std::vector<double> edge_sign_;  // +1 when the child is min(i,j)
  std::vector<int> subtree_size_;  // indexed by vertex
  std::vector<int> preorder_;      // DFS preorder; a subtree is a contiguous run
  std::vector<int> pre_index_;     // vertex -> position in preorder_
};

TreeTransform tree_incidence(const SpanningTree& tree);

inline Eigen::VectorXd apply_transform(const TreeTransform& tt, const Eigen::Ref<const Eigen::VectorXd>& beta) {
  return tt.apply(beta);
}
inline Eigen::VectorXd apply_inverse(const TreeTransform& tt, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  return tt.apply_inverse(theta);
}

/// Dense fused design Xtilde = X * blockdiag(Htilde_k^{-1}) (n x np). Block k,
/// column l is diag(x_k) times column l of Htilde_k^{-1}.
Eigen::MatrixXd build_design(const Eigen::MatrixXd& X, std::span<const TreeTransform> transforms);

/// The same design without materializing it. Products with the design and its
/// transpose cost O(np).
class TreeDesign {
 public:
  TreeDesign(Eigen::MatrixXd X, std::vector<TreeTransform> transforms);

  Eigen::Index rows() const { return X_.rows(); }
  Eigen::Index cols() const { return X_.rows() * X_.cols(); }
  Eigen::Index blocks() const { return X_.cols(); }

  void column(Eigen::Index l, Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::VectorXd times(const Eigen::Ref<const Eigen::VectorXd>& theta) const;
  Eigen::VectorXd transpose_times(const Eigen::Ref<const Eigen::VectorXd>& v) const;

  const Eigen::MatrixXd& X() const { return X_; }
  const std::vector<TreeTransform>& transforms() const { return transforms_; }
  Eigen::MatrixXd dense() const { return build_design(X_, transforms_); }

 private:
  Eigen::MatrixXd X_;
  std::vector<TreeTransform> transforms_;
};

}  // namespace shaplm
