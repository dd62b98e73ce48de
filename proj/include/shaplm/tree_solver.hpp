#pragma once

#include "shaplm/graph_tree.hpp"
#include "shaplm/solver.hpp"

#include <Eigen/Core>

namespace shaplm {

/// Exact minimizer of
///   sum_i (a_i/2 beta_i^2 - b_i beta_i) + sum_l gamma_l |beta_i - beta_j|
/// over a tree (edge l joins i and j), with a_i >= 0 and gamma_l in [0, inf].
/// Derivative messages are passed from the leaves to the root and clamped to
/// [-gamma, gamma] on the way; the solution is then read off top-down. Fused
/// pairs come out bit-identical. When the objective is flat in some direction
/// (a_i = 0 over a whole component) the choice there is arbitrary but
/// deterministic.
Eigen::VectorXd tree_fused_lasso(const SpanningTree& tree, const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b, const Eigen::VectorXd& gamma);

/// Block coordinate descent over a tree-structured design: the blocks are psi
/// and theta_1, ..., theta_p. The psi block is a ridge solve; each theta_k
/// block is solved exactly through `tree_fused_lasso` in the beta_k
/// parameterization with the other blocks held fixed. Stopping rules, penalty
/// weight conventions and the KKT check match the generic overload.
FitResult block_coordinate_descent(const TreeDesign& X, const RidgeBlock& spline,
                                   const Eigen::VectorXd& y, double lambda,
                                   const Eigen::VectorXd& weights, const SolverOptions& options = {},
                                   const Eigen::VectorXd* warm_start = nullptr,
                                   ColumnCache* cache = nullptr);

}  // namespace shaplm
