#include "shaplm/graph_tree.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

namespace shaplm {

namespace {

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(static_cast<std::size_t>(n)), rank_(static_cast<std::size_t>(n), 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
};

}  // namespace

SpatialGraph::SpatialGraph(int n, std::vector<WeightedEdge> edges) : n_(n), edges_(std::move(edges)) {
  if (n < 0) throw GraphError("graph: negative vertex count");
  std::set<std::pair<int, int>> seen;
  UnionFind uf(n);
  int components = n;
  for (const auto& e : edges_) {
    if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n) throw GraphError("graph: edge endpoint out of range");
    if (e.i == e.j) throw GraphError("graph: self loop at vertex " + std::to_string(e.i));
    if (!std::isfinite(e.weight)) throw GraphError("graph: non-finite edge weight");
    if (!seen.insert({std::min(e.i, e.j), std::max(e.i, e.j)}).second) {
      throw GraphError("graph: duplicate edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ")");
    }
    if (uf.unite(e.i, e.j)) --components;
  }
  connected_ = components <= 1;
}

SpatialGraph SpatialGraph::with_weights(std::span<const double> weights) const {
  if (weights.size() != edges_.size()) throw GraphError("graph: weight count does not match edge count");
  SpatialGraph g = *this;
  for (std::size_t e = 0; e < edges_.size(); ++e) g.edges_[e].weight = weights[e];
  return g;
}

SpatialGraph delaunay_graph(std::span<const Point2> locations) {
  const auto dt = delaunay(locations);
  std::vector<WeightedEdge> edges;
  edges.reserve(dt.edges.size());
  for (const auto& [i, j] : dt.edges) edges.push_back({i, j, (locations[i] - locations[j]).norm()});
  return SpatialGraph(static_cast<int>(locations.size()), std::move(edges));
}

SpanningTree::SpanningTree(int n, std::vector<std::pair<int, int>> edges, int root)
    : n_(n), root_(root), edges_(std::move(edges)) {
  if (n < 1) throw GraphError("tree: needs at least one vertex");
  if (static_cast<int>(edges_.size()) != n - 1) {
    throw GraphError("tree: expected " + std::to_string(n - 1) + " edges, got " + std::to_string(edges_.size()));
  }
  if (root < 0 || root >= n) throw GraphError("tree: root out of range");
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(n));
  for (std::size_t l = 0; l < edges_.size(); ++l) {
    const auto [i, j] = edges_[l];
    if (i < 0 || i >= n || j < 0 || j >= n || i == j) throw GraphError("tree: invalid edge");
    adj[i].push_back({j, static_cast<int>(l)});
    adj[j].push_back({i, static_cast<int>(l)});
  }
  parent_.assign(static_cast<std::size_t>(n), -2);
  parent_edge_.assign(static_cast<std::size_t>(n), -1);
  order_.clear();
  order_.reserve(static_cast<std::size_t>(n));
  parent_[root] = -1;
  order_.push_back(root);
  for (std::size_t head = 0; head < order_.size(); ++head) {
    const int u = order_[head];
    for (const auto& [v, l] : adj[u]) {
      if (parent_[v] != -2) continue;
      parent_[v] = u;
      parent_edge_[v] = l;
      order_.push_back(v);
    }
  }
  // n-1 edges reaching all n vertices rules out cycles.
  if (static_cast<int>(order_.size()) != n) throw GraphError("tree: edges do not connect all vertices");
}

SpanningTree mst(const SpatialGraph& graph) {
  if (!graph.connected()) throw GraphError("mst: graph is disconnected");
  const auto& edges = graph.edges();
  std::vector<int> idx(edges.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return edges[a].weight < edges[b].weight; });
  UnionFind uf(graph.num_vertices());
  std::vector<std::pair<int, int>> chosen;
  chosen.reserve(static_cast<std::size_t>(std::max(graph.num_vertices() - 1, 0)));
  for (int e : idx) {
    if (uf.unite(edges[e].i, edges[e].j)) {
      chosen.push_back({edges[e].i, edges[e].j});
      if (static_cast<int>(chosen.size()) == graph.num_vertices() - 1) break;
    }
  }
  return SpanningTree(graph.num_vertices(), std::move(chosen));
}

SpanningTree random_spanning_tree(const SpatialGraph& graph, std::uint64_t seed) {
  if (!graph.connected()) throw GraphError("random_spanning_tree: graph is disconnected");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> w(graph.edges().size());
  for (auto& x : w) x = unif(rng);
  return mst(graph.with_weights(w));
}

std::string tree_to_json_text(const SpanningTree& tree) {
  nlohmann::json doc;
  doc["n"] = tree.num_vertices();
  doc["root"] = tree.root();
  doc["edges"] = nlohmann::json::array();
  for (const auto& [i, j] : tree.edges()) doc["edges"].push_back({i, j});
  return doc.dump();
}

TreeTransform::TreeTransform(SpanningTree tree) : tree_(std::move(tree)) {
  const int n = tree_.num_vertices();
  const auto& edges = tree_.edges();
  const auto& parent = tree_.parent();
  edge_child_.resize(edges.size());
  edge_sign_.resize(edges.size());
  for (std::size_t l = 0; l < edges.size(); ++l) {
    const auto [i, j] = edges[l];
    const int child = parent[j] == i ? j : i;
    edge_child_[l] = child;
    edge_sign_[l] = child == std::min(i, j) ? 1.0 : -1.0;
  }
  subtree_size_.assign(static_cast<std::size_t>(n), 1);
  const auto& order = tree_.bfs_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (parent[*it] >= 0) subtree_size_[parent[*it]] += subtree_size_[*it];
  }
  // DFS preorder so every subtree is a contiguous run.
  std::vector<std::vector<int>> children(static_cast<std::size_t>(n));
  for (int v : order) {
    if (parent[v] >= 0) children[parent[v]].push_back(v);
  }
  preorder_.clear();
  preorder_.reserve(static_cast<std::size_t>(n));
  std::vector<int> stack{tree_.root()};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    preorder_.push_back(u);
    for (auto it = children[u].rbegin(); it != children[u].rend(); ++it) stack.push_back(*it);
  }
  pre_index_.assign(static_cast<std::size_t>(n), 0);
  for (int k = 0; k < n; ++k) pre_index_[preorder_[k]] = k;
}

Eigen::VectorXd TreeTransform::apply(const Eigen::Ref<const Eigen::VectorXd>& beta) const {
  const int n = size();
  if (beta.size() != n) throw std::invalid_argument("apply_transform: length mismatch");
  Eigen::VectorXd theta(n);
  const auto& edges = tree_.edges();
  for (std::size_t l = 0; l < edges.size(); ++l) {
    const auto [i, j] = edges[l];
    theta[static_cast<Eigen::Index>(l)] = beta[std::min(i, j)] - beta[std::max(i, j)];
  }
  theta[n - 1] = beta.sum() / std::sqrt(static_cast<double>(n));
  return theta;
}

Eigen::VectorXd TreeTransform::apply_inverse(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  const int n = size();
  if (theta.size() != n) throw std::invalid_argument("apply_inverse: length mismatch");
  Eigen::VectorXd beta(n);
  const auto& parent = tree_.parent();
  const auto& parent_edge = tree_.parent_edge();
  beta[tree_.root()] = 0.0;
  for (int v : tree_.bfs_order()) {
    const int p = parent[v];
    if (p < 0) continue;
    const int l = parent_edge[v];
    // theta_l = beta_min - beta_max
    beta[v] = v < p ? beta[p] + theta[l] : beta[p] - theta[l];
  }
  const double target_mean = theta[n - 1] / std::sqrt(static_cast<double>(n));
  beta.array() += target_mean - beta.mean();
  return beta;
}

Eigen::VectorXd TreeTransform::apply_inverse_transpose(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  const int n = size();
  if (v.size() != n) throw std::invalid_argument("apply_inverse_transpose: length mismatch");
  Eigen::VectorXd sub = v;
  const auto& parent = tree_.parent();
  const auto& order = tree_.bfs_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (parent[*it] >= 0) sub[parent[*it]] += sub[*it];
  }
  const double total = sub[tree_.root()];
  Eigen::VectorXd out(n);
  for (std::size_t l = 0; l < edge_child_.size(); ++l) {
    const int c = edge_child_[l];
    out[static_cast<Eigen::Index>(l)] =
        edge_sign_[l] * (sub[c] - static_cast<double>(subtree_size_[c]) / n * total);
  }
  out[n - 1] = total / std::sqrt(static_cast<double>(n));
  return out;
}

void TreeTransform::inverse_column(int l, Eigen::Ref<Eigen::VectorXd> out) const {
  const int n = size();
  if (l < 0 || l >= n) throw std::out_of_range("inverse_column: index out of range");
  if (l == n - 1) {
    out.setConstant(1.0 / std::sqrt(static_cast<double>(n)));
    return;
  }
  const int c = edge_child_[l];
  const double s = edge_sign_[l];
  const int size_c = subtree_size_[c];
  out.setConstant(-s * static_cast<double>(size_c) / n);
  const int start = pre_index_[c];
  for (int k = start; k < start + size_c; ++k) out[preorder_[k]] += s;
}

Eigen::MatrixXd TreeTransform::dense_H() const {
  const int n = size();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n - 1, n);
  const auto& edges = tree_.edges();
  for (std::size_t l = 0; l < edges.size(); ++l) {
    const auto [i, j] = edges[l];
    H(static_cast<Eigen::Index>(l), std::min(i, j)) = 1.0;
    H(static_cast<Eigen::Index>(l), std::max(i, j)) = -1.0;
  }
  return H;
}

Eigen::MatrixXd TreeTransform::dense_Htilde() const {
  const int n = size();
  Eigen::MatrixXd Ht(n, n);
  Ht.topRows(n - 1) = dense_H();
  Ht.row(n - 1).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  return Ht;
}

TreeTransform tree_incidence(const SpanningTree& tree) { return TreeTransform(tree); }

Eigen::MatrixXd build_design(const Eigen::MatrixXd& X, std::span<const TreeTransform> transforms) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (static_cast<Eigen::Index>(transforms.size()) != p) {
    throw std::invalid_argument("build_design: need one tree transform per covariate");
  }
  Eigen::MatrixXd Xt(n, n * p);
  Eigen::VectorXd col(n);
  for (Eigen::Index k = 0; k < p; ++k) {
    if (transforms[k].size() != n) throw std::invalid_argument("build_design: tree size does not match rows");
    for (Eigen::Index l = 0; l < n; ++l) {
      transforms[k].inverse_column(static_cast<int>(l), col);
      Xt.col(k * n + l) = X.col(k).cwiseProduct(col);
    }
  }
  return Xt;
}

TreeDesign::TreeDesign(Eigen::MatrixXd X, std::vector<TreeTransform> transforms)
    : X_(std::move(X)), transforms_(std::move(transforms)) {
  if (static_cast<Eigen::Index>(transforms_.size()) != X_.cols()) {
    throw std::invalid_argument("TreeDesign: need one tree transform per covariate");
  }
  for (const auto& t : transforms_) {
    if (t.size() != X_.rows()) throw std::invalid_argument("TreeDesign: tree size does not match rows");
  }
}

void TreeDesign::column(Eigen::Index l, Eigen::Ref<Eigen::VectorXd> out) const {
  const Eigen::Index n = X_.rows();
  const Eigen::Index k = l / n;
  transforms_[k].inverse_column(static_cast<int>(l % n), out);
  out.array() *= X_.col(k).array();
}

Eigen::VectorXd TreeDesign::times(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  const Eigen::Index n = X_.rows();
  if (theta.size() != cols()) throw std::invalid_argument("TreeDesign::times: length mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < X_.cols(); ++k) {
    out += X_.col(k).cwiseProduct(transforms_[k].apply_inverse(theta.segment(k * n, n)));
  }
  return out;
}

Eigen::VectorXd TreeDesign::transpose_times(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  const Eigen::Index n = X_.rows();
  if (v.size() != n) throw std::invalid_argument("TreeDesign::transpose_times: length mismatch");
  Eigen::VectorXd out(cols());
  for (Eigen::Index k = 0; k < X_.cols(); ++k) {
    out.segment(k * n, n) = transforms_[k].apply_inverse_transpose(X_.col(k).cwiseProduct(v));
  }
  return out;
}

}  // namespace shaplm
