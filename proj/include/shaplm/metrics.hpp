#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace shaplm {

class RidgeBlock;

/// Cluster labels; equal labels mean co-membership, the values are arbitrary.
struct Partition {
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  /// Number of distinct labels.
  int num_clusters() const;
};

/// n^{-1} sum_i ||beta_i - beta_hat_i||^2 over rows.
double mse_beta(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate);
double mse_g(const Eigen::VectorXd& truth, const Eigen::VectorXd& estimate);

/// Fraction of the C(n,2) pairs on which both partitions agree (co-clustered
/// in both, or separated in both). Computed from the contingency table.
double rand_index(const Partition& a, const Partition& b);

/// Number of exactly nonzero entries.
int df_theta(const Eigen::VectorXd& theta_hat);

/// Tr[Btilde (Btilde'Btilde + c n rho D)^{-1} Btilde'].
double df_psi(const Eigen::MatrixXd& Btilde, const Eigen::MatrixXd& D, double rho,
              double ridge_factor = 2.0);

struct MetricsReport {
  double mse_beta = 0.0;
  double mse_g = 0.0;
  std::vector<double> rand_index;  // per covariate
};

std::string metrics_to_json_text(const MetricsReport& report);

}  // namespace shaplm
