#pragma once

// Randomized property checks, each reporting its worst observed error.

#include "shaplm/graph_tree.hpp"
#include "shaplm/solver.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace props {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

CheckResult bernstein_identities();
CheckResult polynomial_reproduction();
CheckResult cross_edge_continuity();
CheckResult energy_matrix();
CheckResult tree_transform_inverse();
CheckResult mst_brute_force();
CheckResult solver_against_prox_oracle();
CheckResult oracle_fit_restricted();
CheckResult gp_empirical_covariance();
CheckResult metrics_brute_force();

/// All of the above in a fixed order.
std::vector<CheckResult> run_all();

/// Random tree-structured problem: n locations, p covariates with a random
/// spanning tree each, a q-column spline block with a random PSD penalty.
/// Edge coordinates get unit weights and the mean coordinates weight 0; with
/// `pins`, about one edge coordinate in ten is pinned.
struct SolverInstance {
  shaplm::PenalizedProblem problem;
  Eigen::MatrixXd X;
  std::vector<shaplm::TreeTransform> transforms;
};
SolverInstance random_solver_instance(std::uint64_t seed, int n = 40, int p = 2, int q = 6, bool pins = false);

}  // namespace props
