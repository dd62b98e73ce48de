#include "shaplm/metrics.hpp"

#include "shaplm/solver.hpp"

#include <json.hpp>

#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace shaplm {

int Partition::num_clusters() const {
  return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

double mse_beta(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
    throw std::invalid_argument("mse_beta: shape mismatch");
  }
  if (truth.rows() == 0) throw std::invalid_argument("mse_beta: empty input");
  return (truth - estimate).squaredNorm() / static_cast<double>(truth.rows());
}

double mse_g(const Eigen::VectorXd& truth, const Eigen::VectorXd& estimate) {
  if (truth.size() != estimate.size()) throw std::invalid_argument("mse_g: length mismatch");
  if (truth.size() == 0) throw std::invalid_argument("mse_g: empty input");
  return (truth - estimate).squaredNorm() / static_cast<double>(truth.size());
}

double rand_index(const Partition& a, const Partition& b) {
  const std::size_t n = a.size();
  if (b.size() != n) throw std::invalid_argument("rand_index: partitions have different lengths");
  if (n < 2) throw std::invalid_argument("rand_index: need at least two elements");
  auto pairs = [](double c) { return 0.5 * c * (c - 1.0); };
  std::map<std::pair<int, int>, double> joint;
  std::unordered_map<int, double> ca, cb;
  for (std::size_t i = 0; i < n; ++i) {
    joint[{a.labels[i], b.labels[i]}] += 1;
    ca[a.labels[i]] += 1;
    cb[b.labels[i]] += 1;
  }
  double both = 0, in_a = 0, in_b = 0;
  for (const auto& [k, c] : joint) both += pairs(c);
  for (const auto& [k, c] : ca) in_a += pairs(c);
  for (const auto& [k, c] : cb) in_b += pairs(c);
  const double total = pairs(static_cast<double>(n));
  // agreements = co-clustered in both + separated in both
  const double agree = both + (total - in_a - in_b + both);
  return agree / total;
}

int df_theta(const Eigen::VectorXd& theta_hat) {
  int count = 0;
  for (Eigen::Index i = 0; i < theta_hat.size(); ++i) count += theta_hat[i] != 0.0;
  return count;
}

double df_psi(const Eigen::MatrixXd& Btilde, const Eigen::MatrixXd& D, double rho, double ridge_factor) {
  return RidgeBlock(Btilde, D, rho, ridge_factor).df();
}

std::string metrics_to_json_text(const MetricsReport& report) {
  nlohmann::json doc;
  doc["schema"] = 1;
  doc["mse_beta"] = report.mse_beta;
  doc["mse_g"] = report.mse_g;
  doc["rand_index"] = report.rand_index;
  return doc.dump(2);
}

}  // namespace shaplm
