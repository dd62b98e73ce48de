#pragma once

#include "shaplm/bernstein.hpp"
#include "shaplm/geometry.hpp"
#include "shaplm/graph_tree.hpp"
#include "shaplm/metrics.hpp"
#include "shaplm/solver.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace shaplm {

/// Observations y(s_i) = g(s_i) + x(s_i)' beta(s_i) + noise at n locations.
struct SpatialData {
  std::vector<Point2> locations;
  Eigen::MatrixXd X;  // n x p
  Eigen::VectorXd y;  // n

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return X.cols(); }
  /// Throws on inconsistent sizes, n < 3, p < 1 or non-finite values.
  void validate() const;
};

enum class Method { Shaplm, Psccm };
std::string method_name(Method m);
Method parse_method(const std::string& name);

/// Triangulation carrying the spline: a uniform mesh of `domain` or a mesh file.
struct MeshConfig {
  Rect domain{};
  int resolution = 4;
  std::string file;  // takes precedence when non-empty
};

struct ForestConfig {
  int Q = 0;                         // tree trials; 0 = distance-MST baseline
  std::uint64_t seed = 1;
  std::vector<double> lambda_grid;   // empty: derived from lambda_max per path
  int n_lambda = 30;
  double lambda_min_ratio = 1e-4;
  // Stop a lambda path after this many consecutive grid values fail to improve
  // on the best criterion so far; 0 evaluates the whole grid.
  int lambda_patience = 5;
  std::vector<double> rho_grid = default_rho_grid();
  SplineBasisSpec spline{};
  MeshConfig mesh{};
  double weight_floor = 1e-8;
  double ridge_factor = 2.0;
  SolverOptions solver{};
  int threads = 1;                   // trial workers; 0 = hardware concurrency
  bool keep_trials = false;

  /// 10 log-spaced values in [1e-6, 1e2].
  static std::vector<double> default_rho_grid();
  void validate() const;
};

/// Everything that depends on the data locations but not on tuning: the
/// Delaunay graph and, for SHAPLM, the reparameterized spline system.
struct PreparedData {
  SpatialData data;
  Method method = Method::Shaplm;
  Eigen::MatrixXd design_X;  // X, or [1, X] for PSCCM
  SpatialGraph graph;
  std::shared_ptr<const SplineSystem> spline;  // null for PSCCM

  Eigen::Index n() const { return data.n(); }
  /// Number of fused blocks (p, or p + 1 for PSCCM).
  Eigen::Index blocks() const { return design_X.cols(); }
};

/// Throws GraphError when the Delaunay graph is disconnected.
PreparedData prepare_data(const SpatialData& data, const ForestConfig& config, Method method);

/// One solve at fixed (lambda, rho) over the design built from `trees`.
struct SingleFit {
  Eigen::MatrixXd beta_hat;  // n x blocks
  Eigen::VectorXd psi_hat;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd residual;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Per-coordinate penalty weights over blocks of n: edge coordinates get
/// `edge_weights` (unit when empty), each block's last (mean) coordinate 0.
Eigen::VectorXd coordinate_weights(Eigen::Index n, Eigen::Index blocks,
                                   std::span<const Eigen::VectorXd> edge_weights = {});

SingleFit fit_single(const PreparedData& prep, std::span<const SpanningTree> trees, double lambda,
                     double rho, const Eigen::VectorXd* weights, const ForestConfig& config,
                     const Eigen::VectorXd* warm_start = nullptr);

/// Smallest lambda with every penalized coordinate at zero: the largest
/// |gradient| / weight at the fit of the unpenalized coordinates alone.
double lambda_max(const PreparedData& prep, std::span<const SpanningTree> trees,
                  const Eigen::VectorXd& weights, const ForestConfig& config);

/// `count` log-spaced values from hi down to ratio * hi.
std::vector<double> log_grid_descending(double hi, double ratio, int count);

struct TuningRow {
  double value = 0.0;      // lambda or rho
  double criterion = 0.0;  // mBIC or BIC
  double rss = 0.0;
  double df = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct Tuning {
  double best_value = 0.0;
  std::vector<TuningRow> table;
  SingleFit best_fit;
};

/// mBIC_lambda = log(RSS/n) + log(log(n * blocks)) (log n / n) df(theta).
double mbic_lambda(double rss, Eigen::Index n, Eigen::Index np, int df_theta);
/// BIC_rho = log(RSS/n) + (log n / n) df(psi).
double bic_rho(double rss, Eigen::Index n, double df_psi);

/// Warm-started lambda path at rho = 0, minimizing mBIC; ties go to the
/// smaller lambda. An empty grid in the config is replaced by the default grid.
Tuning tune_lambda(const PreparedData& prep, std::span<const SpanningTree> trees,
                   const Eigen::VectorXd& weights, const ForestConfig& config);
/// rho path at lambda_star minimizing BIC; ties go to the larger rho.
Tuning tune_rho(const PreparedData& prep, std::span<const SpanningTree> trees,
                const Eigen::VectorXd& weights, double lambda_star, const ForestConfig& config,
                const Eigen::VectorXd* warm_start = nullptr);

Eigen::MatrixXd average_estimates(std::span<const Eigen::MatrixXd> estimates);

/// One row per graph edge, one column per covariate: |beta_bar_ik - beta_bar_jk|.
Eigen::MatrixXd adaptive_weights(const Eigen::MatrixXd& beta_bar, const SpatialGraph& graph);

/// Components of each tree after deleting the edges whose fused coordinate is
/// nonzero. Labels are 0-based in order of first appearance.
std::vector<Partition> extract_clusters(const Eigen::VectorXd& theta_hat,
                                        std::span<const SpanningTree> trees);

/// Per-trial estimates and selected lambdas; a prefix of a trial set is the
/// trial set of a smaller Q with the same seed.
struct TrialSet {
  std::vector<Eigen::MatrixXd> estimates;
  std::vector<double> lambdas;
};

/// Trial q uses seed + q; its trees are drawn per block from that seed.
TrialSet run_trials(const PreparedData& prep, const ForestConfig& config, int Q);

struct ShaplmFit {
  Method method = Method::Shaplm;
  int Q = 0;
  std::vector<Point2> locations;
  Eigen::MatrixXd beta_hat;  // n x p
  std::optional<SplineFunction> g_hat;
  Eigen::VectorXd g_fitted;  // g at the training locations
  Eigen::VectorXd psi_hat;
  Eigen::VectorXd theta_hat;
  std::vector<SpanningTree> trees;
  std::vector<Partition> clusters;  // p
  std::optional<Partition> intercept_clusters;
  double lambda_star = 0.0;
  double rho_star = 0.0;
  int df_theta = 0;
  double df_psi = 0.0;
  std::vector<TuningRow> lambda_table;
  std::vector<TuningRow> rho_table;
  bool converged = false;
  double objective = 0.0;
  double kkt_residual = 0.0;
  std::vector<Eigen::MatrixXd> trial_estimates;
  std::vector<double> trial_lambdas;
};

/// Final fit given the trial set (whose size is Q): averaged estimate,
/// adaptive weights, per-block MSTs and the two-step tuning.
ShaplmFit fit_from_trials(const PreparedData& prep, const ForestConfig& config, const TrialSet& trials);

ShaplmFit forest_fit(const SpatialData& data, const ForestConfig& config);
ShaplmFit psccm_fit(const SpatialData& data, const ForestConfig& config);
ShaplmFit fit_method(const SpatialData& data, const ForestConfig& config, Method method);

/// y_hat = g(s) + x' beta_hat(nearest training location); ties go to the lower index.
Eigen::VectorXd predict(const ShaplmFit& fit, std::span<const Point2> points, const Eigen::MatrixXd& X);

/// Index of the nearest training location (lowest index on ties).
int nearest_location(std::span<const Point2> locations, const Point2& p);

/// Rows (x, y, g) on a res x res grid of cell centres over `domain`.
Eigen::MatrixXd g_grid(const ShaplmFit& fit, const Rect& domain, int resolution);

std::string fit_to_json_text(const ShaplmFit& fit);

/// Runs body(i) for i in [0, count) on up to `threads` workers (0 = hardware
/// concurrency). The first exception is rethrown after all workers finish.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

}  // namespace shaplm
