#include "shaplm/shaplm.hpp"

#include "shaplm/simulate.hpp"
#include "shaplm/tree_solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace shaplm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Design, spline block and column cache shared along one tuning path.
struct Workspace {
  TreeDesign design;
  RidgeBlock spline;
  ColumnCache cache;

  Workspace(const PreparedData& prep, std::span<const SpanningTree> trees, double rho,
            const ForestConfig& config)
      : design(prep.design_X, make_transforms(prep, trees)), spline(make_spline(prep, rho, config)) {}

  static std::vector<TreeTransform> make_transforms(const PreparedData& prep,
                                                    std::span<const SpanningTree> trees) {
    if (static_cast<Eigen::Index>(trees.size()) != prep.blocks()) {
      throw std::invalid_argument("fit: need one spanning tree per fused block");
    }
    std::vector<TreeTransform> out;
    out.reserve(trees.size());
    for (const auto& t : trees) {
      if (t.num_vertices() != prep.n()) throw std::invalid_argument("fit: tree does not span the locations");
      out.emplace_back(t);
    }
    return out;
  }

  static RidgeBlock make_spline(const PreparedData& prep, double rho, const ForestConfig& config) {
    if (!prep.spline) return RidgeBlock(prep.n());
    return RidgeBlock(prep.spline->Btilde, prep.spline->D, rho, config.ridge_factor);
  }
};

SingleFit to_single(const PreparedData& prep, const Workspace& ws, FitResult&& r) {
  const Eigen::Index n = prep.n();
  SingleFit out;
  out.beta_hat.resize(n, prep.blocks());
  for (Eigen::Index k = 0; k < prep.blocks(); ++k) {
    out.beta_hat.col(k) = ws.design.transforms()[k].apply_inverse(r.theta_hat.segment(k * n, n));
  }
  out.psi_hat = std::move(r.psi_hat);
  out.theta_hat = std::move(r.theta_hat);
  out.residual = std::move(r.residual);
  out.objective = r.objective;
  out.kkt_residual = r.kkt_residual;
  out.iterations = r.iterations;
  out.converged = r.converged;
  return out;
}

double lambda_max_in(const PreparedData& prep, Workspace& ws, const Eigen::VectorXd& weights,
                     const ForestConfig& config) {
  Eigen::VectorXd null_weights = weights;
  bool any = false;
  for (Eigen::Index l = 0; l < weights.size(); ++l) {
    if (weights[l] > 0 && !is_pinned(weights[l])) {
      null_weights[l] = kInf;
      any = true;
    }
  }
  if (!any) return 1.0;
  const FitResult null_fit =
      block_coordinate_descent(ws.design, ws.spline, prep.data.y, 0.0, null_weights, config.solver, nullptr, &ws.cache);
  const Eigen::VectorXd grad = ws.design.transpose_times(null_fit.residual) / static_cast<double>(prep.n());
  double best = 0.0;
  for (Eigen::Index l = 0; l < weights.size(); ++l) {
    if (weights[l] > 0 && !is_pinned(weights[l])) best = std::max(best, std::abs(grad[l]) / weights[l]);
  }
  return best > 0 ? best : 1.0;
}

double safe_log_mse(double rss, Eigen::Index n) {
  return std::log(std::max(rss / static_cast<double>(n), std::numeric_limits<double>::min()));
}

void check_grid(const std::vector<double>& grid, const char* name) {
  for (double v : grid) {
    if (!(v > 0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " values must be positive and finite");
  }
}

}  // namespace

void SpatialData::validate() const {
  const auto n = static_cast<Eigen::Index>(locations.size());
  if (n < 3) throw std::invalid_argument("data: need at least 3 locations");
  if (y.size() != n || X.rows() != n) throw std::invalid_argument("data: locations, X and y disagree on n");
  if (X.cols() < 1) throw std::invalid_argument("data: need at least one covariate");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("data: non-finite values");
  for (const auto& s : locations) {
    if (!s.allFinite()) throw std::invalid_argument("data: non-finite location");
  }
}

std::string method_name(Method m) { return m == Method::Shaplm ? "shaplm" : "psccm"; }

Method parse_method(const std::string& name) {
  if (name == "shaplm") return Method::Shaplm;
  if (name == "psccm") return Method::Psccm;
  throw std::invalid_argument("unknown method '" + name + "' (expected shaplm or psccm)");
}

std::vector<double> ForestConfig::default_rho_grid() {
  std::vector<double> g = log_grid_descending(1e2, 1e-8, 10);
  std::reverse(g.begin(), g.end());
  return g;
}

void ForestConfig::validate() const {
  if (Q < 0) throw std::invalid_argument("config: Q must be >= 0");
  check_grid(lambda_grid, "lambda_grid");
  for (std::size_t i = 1; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] < lambda_grid[i - 1])) throw std::invalid_argument("config: lambda_grid must be strictly descending");
  }
  check_grid(rho_grid, "rho_grid");
  if (rho_grid.empty()) throw std::invalid_argument("config: rho_grid must not be empty");
  if (lambda_grid.empty()) {
    if (n_lambda < 1) throw std::invalid_argument("config: n_lambda must be >= 1");
    if (!(lambda_min_ratio > 0 && lambda_min_ratio <= 1)) {
      throw std::invalid_argument("config: lambda_min_ratio must lie in (0, 1]");
    }
  }
  if (!(weight_floor >= 0)) throw std::invalid_argument("config: weight_floor must be >= 0");
  if (!(ridge_factor > 0)) throw std::invalid_argument("config: ridge_factor must be > 0");
  if (lambda_patience < 0) throw std::invalid_argument("config: lambda_patience must be >= 0");
  if (threads < 0) throw std::invalid_argument("config: threads must be >= 0");
  if (mesh.file.empty() && mesh.resolution < 1) throw std::invalid_argument("config: mesh resolution must be >= 1");
  spline.validate();
}

PreparedData prepare_data(const SpatialData& data, const ForestConfig& config, Method method) {
  data.validate();
  config.validate();
  PreparedData prep;
  prep.data = data;
  prep.method = method;
  prep.graph = delaunay_graph(data.locations);
  if (!prep.graph.connected()) throw GraphError("Delaunay graph of the locations is disconnected");
  if (method == Method::Psccm) {
    prep.design_X.resize(data.n(), data.p() + 1);
    prep.design_X.col(0).setOnes();
    prep.design_X.rightCols(data.p()) = data.X;
  } else {
    prep.design_X = data.X;
    auto mesh = std::make_shared<const TriangulationMesh>(
        config.mesh.file.empty() ? mesh_uniform_rect(config.mesh.domain, config.mesh.resolution)
                                 : mesh_from_file(config.mesh.file));
    prep.spline = std::make_shared<const SplineSystem>(build_spline_system(mesh, config.spline, data.locations));
  }
  return prep;
}

Eigen::VectorXd coordinate_weights(Eigen::Index n, Eigen::Index blocks,
                                   std::span<const Eigen::VectorXd> edge_weights) {
  if (!edge_weights.empty() && static_cast<Eigen::Index>(edge_weights.size()) != blocks) {
    throw std::invalid_argument("coordinate_weights: need one weight vector per block");
  }
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n * blocks);
  for (Eigen::Index k = 0; k < blocks; ++k) {
    if (!edge_weights.empty()) {
      if (edge_weights[k].size() != n - 1) throw std::invalid_argument("coordinate_weights: need n-1 edge weights");
      w.segment(k * n, n - 1) = edge_weights[k];
    }
    w[k * n + n - 1] = 0.0;
  }
  return w;
}

SingleFit fit_single(const PreparedData& prep, std::span<const SpanningTree> trees, double lambda,
                     double rho, const Eigen::VectorXd* weights, const ForestConfig& config,
                     const Eigen::VectorXd* warm_start) {
  Workspace ws(prep, trees, rho, config);
  const Eigen::VectorXd w = weights ? *weights : coordinate_weights(prep.n(), prep.blocks());
  FitResult r = block_coordinate_descent(ws.design, ws.spline, prep.data.y, lambda, w, config.solver, warm_start);
  return to_single(prep, ws, std::move(r));
}

double lambda_max(const PreparedData& prep, std::span<const SpanningTree> trees,
                  const Eigen::VectorXd& weights, const ForestConfig& config) {
  Workspace ws(prep, trees, 0.0, config);
  return lambda_max_in(prep, ws, weights, config);
}

std::vector<double> log_grid_descending(double hi, double ratio, int count) {
  if (!(hi > 0) || !(ratio > 0 && ratio <= 1) || count < 1) throw std::invalid_argument("log grid: invalid arguments");
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) {
    g[0] = hi;
    return g;
  }
  const double step = std::log(ratio) / (count - 1);
  for (int i = 0; i < count; ++i) g[i] = hi * std::exp(step * i);
  g.back() = hi * ratio;
  return g;
}

double mbic_lambda(double rss, Eigen::Index n, Eigen::Index np, int df_theta) {
  const double dn = static_cast<double>(n);
  return safe_log_mse(rss, n) + std::log(std::log(static_cast<double>(np))) * std::log(dn) / dn * df_theta;
}

double bic_rho(double rss, Eigen::Index n, double df_psi) {
  const double dn = static_cast<double>(n);
  return safe_log_mse(rss, n) + std::log(dn) / dn * df_psi;
}


Tuning tune_lambda(const PreparedData& prep, std::span<const SpanningTree> trees,
                   const Eigen::VectorXd& weights, const ForestConfig& config) {
  Workspace ws(prep, trees, 0.0, config);
  std::vector<double> grid = config.lambda_grid;
  if (grid.empty()) {
    grid = log_grid_descending(lambda_max_in(prep, ws, weights, config), config.lambda_min_ratio, config.n_lambda);
  } else {
    std::sort(grid.begin(), grid.end(), std::greater<>());
  }
  const Eigen::Index n = prep.n(), np = ws.design.cols();
  Tuning out;
  Eigen::VectorXd warm = Eigen::VectorXd::Zero(np);
  std::optional<FitResult> best;
  double best_crit = kInf;
  int worse = 0;
  for (double lambda : grid) {
    if (config.lambda_patience > 0 && worse >= config.lambda_patience) break;
    FitResult r = block_coordinate_descent(ws.design, ws.spline, prep.data.y, lambda, weights, config.solver,
                                           &warm, &ws.cache);
    TuningRow row;
    row.value = lambda;
    row.rss = r.residual.squaredNorm();
    row.df = df_theta(r.theta_hat);
    row.criterion = mbic_lambda(row.rss, n, np, static_cast<int>(row.df));
    row.iterations = r.iterations;
    row.converged = r.converged;
    out.table.push_back(row);
    warm = r.theta_hat;
    // Descending grid: an equal criterion moves the choice to the smaller lambda.
    if (std::isfinite(row.criterion) && row.criterion <= best_crit) {
      best_crit = row.criterion;
      out.best_value = lambda;
      best = std::move(r);
      worse = 0;
    } else {
      ++worse;
    }
  }
  if (!best) throw NumericalError("lambda tuning: no fit produced a finite criterion");
  out.best_fit = to_single(prep, ws, std::move(*best));
  return out;
}

Tuning tune_rho(const PreparedData& prep, std::span<const SpanningTree> trees,
                const Eigen::VectorXd& weights, double lambda_star, const ForestConfig& config,
                const Eigen::VectorXd* warm_start) {
  if (!prep.spline) throw std::invalid_argument("rho tuning: the model has no spline block");
  std::vector<double> grid = config.rho_grid;
  if (grid.empty()) throw std::invalid_argument("rho tuning: empty grid");
  std::sort(grid.begin(), grid.end());
  const Eigen::Index n = prep.n();
  Tuning out;
  Eigen::VectorXd warm = warm_start ? *warm_start : Eigen::VectorXd::Zero(n * prep.blocks());
  double best_crit = kInf;
  for (double rho : grid) {
    Workspace ws(prep, trees, rho, config);
    FitResult r = block_coordinate_descent(ws.design, ws.spline, prep.data.y, lambda_star, weights,
                                           config.solver, &warm, &ws.cache);
    TuningRow row;
    row.value = rho;
    row.rss = r.residual.squaredNorm();
    row.df = ws.spline.df();
    row.criterion = bic_rho(row.rss, n, row.df);
    row.iterations = r.iterations;
    row.converged = r.converged;
    out.table.push_back(row);
    warm = r.theta_hat;
    // Ascending grid: an equal criterion moves the choice to the larger rho.
    if (std::isfinite(row.criterion) && row.criterion <= best_crit) {
      best_crit = row.criterion;
      out.best_value = rho;
      out.best_fit = to_single(prep, ws, std::move(r));
    }
  }
  if (!std::isfinite(best_crit)) throw NumericalError("rho tuning: no fit produced a finite criterion");
  return out;
}

Eigen::MatrixXd average_estimates(std::span<const Eigen::MatrixXd> estimates) {
  if (estimates.empty()) throw std::invalid_argument("average_estimates: no estimates");
  Eigen::MatrixXd sum = estimates[0];
  for (std::size_t q = 1; q < estimates.size(); ++q) {
    if (estimates[q].rows() != sum.rows() || estimates[q].cols() != sum.cols()) {
      throw std::invalid_argument("average_estimates: inconsistent shapes");
    }
    sum += estimates[q];
  }
  return sum / static_cast<double>(estimates.size());
}

Eigen::MatrixXd adaptive_weights(const Eigen::MatrixXd& beta_bar, const SpatialGraph& graph) {
  if (beta_bar.rows() != graph.num_vertices()) {
    throw std::invalid_argument("adaptive_weights: graph vertices do not match estimate rows");
  }
  const auto& edges = graph.edges();
  Eigen::MatrixXd w(static_cast<Eigen::Index>(edges.size()), beta_bar.cols());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    w.row(static_cast<Eigen::Index>(e)) = (beta_bar.row(edges[e].i) - beta_bar.row(edges[e].j)).cwiseAbs();
  }
  return w;
}

std::vector<Partition> extract_clusters(const Eigen::VectorXd& theta_hat,
                                        std::span<const SpanningTree> trees) {
  std::vector<Partition> out;
  Eigen::Index offset = 0;
  for (const auto& tree : trees) {
    const int n = tree.num_vertices();
    if (offset + n > theta_hat.size()) throw std::invalid_argument("extract_clusters: theta too short");
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int v) {
      while (parent[v] != v) v = parent[v] = parent[parent[v]];
      return v;
    };
    const auto& edges = tree.edges();
    for (std::size_t l = 0; l < edges.size(); ++l) {
      if (theta_hat[offset + static_cast<Eigen::Index>(l)] != 0.0) continue;
      const int a = find(edges[l].first), b = find(edges[l].second);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    Partition part;
    part.labels.assign(static_cast<std::size_t>(n), -1);
    std::vector<int> label_of_root(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (int v = 0; v < n; ++v) {
      const int r = find(v);
      if (label_of_root[r] < 0) label_of_root[r] = next++;
      part.labels[v] = label_of_root[r];
    }
    out.push_back(std::move(part));
    offset += n;
  }
  if (offset != theta_hat.size()) throw std::invalid_argument("extract_clusters: theta length does not match trees");
  return out;
}

TrialSet run_trials(const PreparedData& prep, const ForestConfig& config, int Q) {
  if (Q < 0) throw std::invalid_argument("run_trials: Q must be >= 0");
  TrialSet out;
  out.estimates.resize(static_cast<std::size_t>(Q));
  out.lambdas.resize(static_cast<std::size_t>(Q));
  const Eigen::VectorXd weights = coordinate_weights(prep.n(), prep.blocks());
  parallel_for(Q, config.threads, [&](int q) {
    const std::uint64_t trial_seed = config.seed + static_cast<std::uint64_t>(q);
    std::vector<SpanningTree> trees;
    for (Eigen::Index k = 0; k < prep.blocks(); ++k) {
      trees.push_back(random_spanning_tree(prep.graph, derive_seed(trial_seed, static_cast<std::uint64_t>(k))));
    }
    Tuning t = tune_lambda(prep, trees, weights, config);
    out.estimates[q] = std::move(t.best_fit.beta_hat);
    out.lambdas[q] = t.best_value;
  });
  return out;
}

ShaplmFit fit_from_trials(const PreparedData& prep, const ForestConfig& config, const TrialSet& trials) {
  const Eigen::Index n = prep.n(), blocks = prep.blocks();
  const int Q = static_cast<int>(trials.estimates.size());
  std::vector<SpanningTree> trees;
  Eigen::VectorXd weights;
  if (Q == 0) {
    const SpanningTree distance_tree = mst(prep.graph);
    trees.assign(static_cast<std::size_t>(blocks), distance_tree);
    weights = coordinate_weights(n, blocks);
  } else {
    const Eigen::MatrixXd beta_bar = average_estimates(trials.estimates);
    const Eigen::MatrixXd adaptive = adaptive_weights(beta_bar, prep.graph);
    std::vector<Eigen::VectorXd> edge_weights;
    for (Eigen::Index k = 0; k < blocks; ++k) {
      std::vector<double> w(static_cast<std::size_t>(adaptive.rows()));
      for (Eigen::Index e = 0; e < adaptive.rows(); ++e) {
        w[e] = adaptive(e, k) < config.weight_floor ? 0.0 : adaptive(e, k);
      }
      trees.push_back(mst(prep.graph.with_weights(w)));
      const auto& tree_edges = trees.back().edges();
      Eigen::VectorXd mult(n - 1);
      for (Eigen::Index l = 0; l < n - 1; ++l) {
        const double a = std::abs(beta_bar(tree_edges[l].first, k) - beta_bar(tree_edges[l].second, k));
        mult[l] = a < config.weight_floor ? kInf : 1.0 / a;
      }
      edge_weights.push_back(std::move(mult));
    }
    weights = coordinate_weights(n, blocks, edge_weights);
  }

  ShaplmFit fit;
  fit.method = prep.method;
  fit.Q = Q;
  fit.locations = prep.data.locations;
  Tuning lam = tune_lambda(prep, trees, weights, config);
  fit.lambda_star = lam.best_value;
  fit.lambda_table = std::move(lam.table);
  SingleFit final_fit;
  if (prep.spline) {
    Tuning rho = tune_rho(prep, trees, weights, fit.lambda_star, config, &lam.best_fit.theta_hat);
    fit.rho_star = rho.best_value;
    fit.rho_table = std::move(rho.table);
    for (const auto& row : fit.rho_table) {
      if (row.value == fit.rho_star) fit.df_psi = row.df;
    }
    final_fit = std::move(rho.best_fit);
  } else {
    final_fit = std::move(lam.best_fit);
  }

  fit.theta_hat = final_fit.theta_hat;
  fit.psi_hat = final_fit.psi_hat;
  fit.df_theta = df_theta(final_fit.theta_hat);
  fit.converged = final_fit.converged;
  fit.objective = final_fit.objective;
  fit.kkt_residual = final_fit.kkt_residual;
  std::vector<Partition> clusters = extract_clusters(final_fit.theta_hat, trees);
  if (prep.spline) {
    fit.beta_hat = final_fit.beta_hat;
    fit.g_fitted = prep.spline->Btilde * final_fit.psi_hat;
    fit.g_hat.emplace(prep.spline->mesh, prep.spline->spec, prep.spline->Q2 * final_fit.psi_hat);
    fit.clusters = std::move(clusters);
  } else {
    fit.beta_hat = final_fit.beta_hat.rightCols(blocks - 1);
    fit.g_fitted = final_fit.beta_hat.col(0);
    fit.intercept_clusters = clusters.front();
    fit.clusters.assign(clusters.begin() + 1, clusters.end());
  }
  fit.trees = std::move(trees);
  if (config.keep_trials) {
    fit.trial_estimates = trials.estimates;
    fit.trial_lambdas = trials.lambdas;
  }
  return fit;
}

ShaplmFit fit_method(const SpatialData& data, const ForestConfig& config, Method method) {
  const PreparedData prep = prepare_data(data, config, method);
  const TrialSet trials = run_trials(prep, config, config.Q);
  return fit_from_trials(prep, config, trials);
}

ShaplmFit forest_fit(const SpatialData& data, const ForestConfig& config) {
  return fit_method(data, config, Method::Shaplm);
}

ShaplmFit psccm_fit(const SpatialData& data, const ForestConfig& config) {
  return fit_method(data, config, Method::Psccm);
}

int nearest_location(std::span<const Point2> locations, const Point2& p) {
  if (locations.empty()) throw std::invalid_argument("nearest_location: no locations");
  int best = 0;
  double best_d = (locations[0] - p).squaredNorm();
  for (std::size_t i = 1; i < locations.size(); ++i) {
    const double d = (locations[i] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Eigen::VectorXd predict(const ShaplmFit& fit, std::span<const Point2> points, const Eigen::MatrixXd& X) {
  if (X.rows() != static_cast<Eigen::Index>(points.size()) || X.cols() != fit.beta_hat.cols()) {
    throw std::invalid_argument("predict: covariates must be m x p for m points");
  }
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Point2& s = points[i];
    if (fit.g_hat && !fit.g_hat->mesh().locate(s)) {
      throw GeometryError("predict: point lies outside the spline domain");
    }
    const int j = nearest_location(fit.locations, s);
    const double g = fit.g_hat ? fit.g_hat->value(s) : fit.g_fitted[j];
    out[i] = g + X.row(i).dot(fit.beta_hat.row(j));
  }
  return out;
}

Eigen::MatrixXd g_grid(const ShaplmFit& fit, const Rect& domain, int resolution) {
  if (resolution < 1) throw std::invalid_argument("g_grid: resolution must be >= 1");
  std::vector<Eigen::Vector3d> rows;
  const double hx = (domain.xmax - domain.xmin) / resolution, hy = (domain.ymax - domain.ymin) / resolution;
  for (int j = 0; j < resolution; ++j) {
    for (int i = 0; i < resolution; ++i) {
      const Point2 s(domain.xmin + (i + 0.5) * hx, domain.ymin + (j + 0.5) * hy);
      double g;
      if (fit.g_hat) {
        if (!fit.g_hat->mesh().locate(s)) continue;
        g = fit.g_hat->value(s);
      } else {
        g = fit.g_fitted[nearest_location(fit.locations, s)];
      }
      rows.emplace_back(s.x(), s.y(), g);
    }
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return out;
}

namespace {

nlohmann::json table_json(const std::vector<TuningRow>& table, const char* value_key, const char* crit_key) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : table) {
    arr.push_back({{value_key, row.value},
                   {crit_key, row.criterion},
                   {"rss", row.rss},
                   {"df", row.df},
                   {"iterations", row.iterations},
                   {"converged", row.converged}});
  }
  return arr;
}

}  // namespace

std::string fit_to_json_text(const ShaplmFit& fit) {
  nlohmann::json doc;
  doc["schema"] = 1;
  doc["method"] = method_name(fit.method);
  doc["Q"] = fit.Q;
  doc["n"] = fit.beta_hat.rows();
  doc["p"] = fit.beta_hat.cols();
  doc["lambda_star"] = fit.lambda_star;
  if (fit.method == Method::Shaplm) doc["rho_star"] = fit.rho_star;
  doc["df_theta"] = fit.df_theta;
  doc["df_psi"] = fit.df_psi;
  doc["converged"] = fit.converged;
  doc["objective"] = fit.objective;
  doc["kkt_residual"] = fit.kkt_residual;
  nlohmann::json beta = nlohmann::json::array(), locs = nlohmann::json::array();
  for (Eigen::Index i = 0; i < fit.beta_hat.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < fit.beta_hat.cols(); ++k) row.push_back(fit.beta_hat(i, k));
    beta.push_back(std::move(row));
    locs.push_back({fit.locations[i].x(), fit.locations[i].y()});
  }
  doc["locations"] = std::move(locs);
  doc["beta_hat"] = std::move(beta);
  doc["g_fitted"] = std::vector<double>(fit.g_fitted.data(), fit.g_fitted.data() + fit.g_fitted.size());
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& part : fit.clusters) clusters.push_back(part.labels);
  doc["clusters"] = std::move(clusters);
  if (fit.intercept_clusters) doc["intercept_clusters"] = fit.intercept_clusters->labels;
  doc["mbic_table"] = table_json(fit.lambda_table, "lambda", "mbic");
  if (fit.method == Method::Shaplm) doc["bic_table"] = table_json(fit.rho_table, "rho", "bic");
  if (fit.g_hat) {
    const auto& a = fit.g_hat->alpha();
    doc["spline"] = {{"degree", fit.g_hat->spec().degree},
                     {"smoothness", fit.g_hat->spec().smoothness},
                     {"alpha", std::vector<double>(a.data(), a.data() + a.size())}};
  }
  if (!fit.trial_lambdas.empty()) doc["trial_lambdas"] = fit.trial_lambdas;
  return doc.dump(2);
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (count <= 0) return;
  int workers = threads == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : threads;
  workers = std::clamp(workers, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&]() {
    for (int i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace shaplm
