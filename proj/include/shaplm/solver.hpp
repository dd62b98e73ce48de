#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace shaplm {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
Scalar soft_threshold(Scalar z, Scalar gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return Scalar(0);
}

/// Materialized design matrix with the interface the solver expects.
class DenseDesign {
 public:
  explicit DenseDesign(Eigen::MatrixXd X) : X_(std::move(X)) {}

  Eigen::Index rows() const { return X_.rows(); }
  Eigen::Index cols() const { return X_.cols(); }
  void column(Eigen::Index l, Eigen::Ref<Eigen::VectorXd> out) const { out = X_.col(l); }
  Eigen::VectorXd times(const Eigen::Ref<const Eigen::VectorXd>& theta) const { return X_ * theta; }
  Eigen::VectorXd transpose_times(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    return X_.transpose() * v;
  }
  const Eigen::MatrixXd& matrix() const { return X_; }

 private:
  Eigen::MatrixXd X_;
};

/// The spline block at a fixed rho: minimizes
///   (1/2n) ||u - Btilde psi||^2 + (c/2) rho psi' D psi
/// in closed form through G = Btilde'Btilde + c n rho D, where c is the ridge
/// factor (2 reproduces the rho psi' D psi penalty of the fitting objective).
class RidgeBlock {
 public:
  /// Empty block: no spline columns, projections are the identity.
  explicit RidgeBlock(Eigen::Index n) : n_(n) {}

  /// When G is not numerically positive definite a diagonal jitter starting at
  /// 1e-10 times its mean diagonal is added and escalated tenfold up to 1e-6.
  RidgeBlock(const Eigen::MatrixXd& Btilde, const Eigen::MatrixXd& D, double rho,
             double ridge_factor = 2.0);

  Eigen::Index rows() const { return n_; }
  Eigen::Index dim() const { return Btilde_.cols(); }
  bool empty() const { return Btilde_.cols() == 0; }
  double rho() const { return rho_; }
  double ridge_factor() const { return factor_; }
  double jitter() const { return jitter_; }
  const Eigen::MatrixXd& Btilde() const { return Btilde_; }
  const Eigen::MatrixXd& D() const { return D_; }

  /// psi = G^{-1} Btilde' u.
  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  /// G^{-1} rhs for a q-row right-hand side.
  Eigen::MatrixXd gram_solve(const Eigen::MatrixXd& rhs) const;
  /// u - Btilde psi(u): the residual left after the optimal spline fit.
  Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& u) const;
  /// Tr[Btilde G^{-1} Btilde'].
  double df() const;
  /// (c/2) rho psi' D psi.
  double penalty(const Eigen::Ref<const Eigen::VectorXd>& psi) const;

 private:
  Eigen::Index n_ = 0;
  Eigen::MatrixXd Btilde_;
  Eigen::MatrixXd D_;
  double rho_ = 0.0;
  double factor_ = 2.0;
  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol_;
};

/// psi = (Btilde'Btilde + c n rho D)^{-1} Btilde' residual. Throws
/// NumericalError when the system is singular; callers wanting automatic
/// jitter use RidgeBlock.
Eigen::VectorXd solve_spline_block(const Eigen::MatrixXd& Btilde, const Eigen::MatrixXd& D,
                                   double rho, const Eigen::VectorXd& residual,
                                   double ridge_factor = 2.0);

/// Closed-form fit on the true support: (E'E + c n rho Dtilde)^{-1} E' y.
Eigen::VectorXd oracle_fit(const Eigen::MatrixXd& E, const Eigen::MatrixXd& Dtilde, double rho,
                           const Eigen::VectorXd& y, double ridge_factor = 2.0);

struct SolverOptions {
  double tol = 1e-7;       // relative objective change between sweeps
  double kkt_tol = 1e-6;   // max subgradient violation accepted at convergence
  int max_iter = 10000;    // coordinate sweeps
};

struct FitResult {
  Eigen::VectorXd psi_hat;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd residual;  // y - Btilde psi - Xtilde theta
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  double kkt_residual = std::numeric_limits<double>::infinity();
  double objective = std::numeric_limits<double>::infinity();
};

/// Design columns x_l, their projections M x_l and curvatures x_l' M x_l,
/// kept across solves that share one design and one spline block (a
/// warm-started path). Must not be reused with a different design or rho.
struct ColumnCache {
  std::vector<int> slot;
  std::vector<Eigen::VectorXd> cols;
  std::vector<Eigen::VectorXd> mcols;  // unused when the spline block is empty
  std::vector<double> curv;
};

/// Penalty weights: 0 = unpenalized, +inf = coordinate pinned at zero,
/// otherwise a multiplier on lambda |theta_l|.
inline bool is_pinned(double w) { return std::isinf(w); }

/// (1/2n)||y - Btilde psi - Xtilde theta||^2 + (c/2) rho psi'D psi + lambda sum w_l |theta_l|.
template <typename Design>
double penalized_objective(const Design& X, const RidgeBlock& spline, const Eigen::VectorXd& y,
                           double lambda, const Eigen::VectorXd& weights,
                           const Eigen::VectorXd& psi, const Eigen::VectorXd& theta) {
  Eigen::VectorXd r = y - X.times(theta);
  double pen = 0.0;
  if (!spline.empty()) {
    r -= spline.Btilde() * psi;
    pen = spline.penalty(psi);
  }
  double l1 = 0.0;
  for (Eigen::Index l = 0; l < theta.size(); ++l) {
    if (theta[l] != 0.0 && !is_pinned(weights[l])) l1 += weights[l] * std::abs(theta[l]);
  }
  return 0.5 * r.squaredNorm() / static_cast<double>(y.size()) + pen + lambda * l1;
}

/// Block coordinate descent on the doubly penalized least-squares objective.
///
/// The spline block is kept at its exact minimizer for the current theta: the
/// working residual is v = M u with u = y - Xtilde theta and
/// M = I - Btilde G^{-1} Btilde', and every theta coordinate step minimizes the
/// objective with psi re-solved. Coordinates cycle over an ever-active set;
/// once a sweep changes the objective by less than `tol` (relative), the full
/// gradient is checked and violators join the active set. Convergence requires
/// a KKT residual below `kkt_tol`.
template <typename Design>
FitResult block_coordinate_descent(const Design& X, const RidgeBlock& spline,
                                   const Eigen::VectorXd& y, double lambda,
                                   const Eigen::VectorXd& weights, const SolverOptions& options = {},
                                   const Eigen::VectorXd* warm_start = nullptr,
                                   ColumnCache* cache = nullptr) {
  const Eigen::Index n = X.rows(), P = X.cols();
  if (y.size() != n) throw std::invalid_argument("solver: response length does not match design rows");
  if (weights.size() != P) throw std::invalid_argument("solver: penalty weight length does not match design columns");
  if (spline.rows() != n) throw std::invalid_argument("solver: spline block rows do not match design rows");
  if (!(lambda >= 0)) throw std::invalid_argument("solver: lambda must be >= 0");
  for (Eigen::Index l = 0; l < P; ++l) {
    if (!(weights[l] >= 0)) throw std::invalid_argument("solver: penalty weights must be >= 0");
  }
  const double dn = static_cast<double>(n);

  FitResult fit;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(P);
  if (warm_start) {
    if (warm_start->size() != P) throw std::invalid_argument("solver: warm start has wrong length");
    theta = *warm_start;
  }
  for (Eigen::Index l = 0; l < P; ++l) {
    if (is_pinned(weights[l])) theta[l] = 0.0;
  }

  Eigen::VectorXd u = y - X.times(theta);
  Eigen::VectorXd v = spline.project(u);

  ColumnCache local_cache;
  ColumnCache& cc = cache ? *cache : local_cache;
  if (cc.slot.empty()) cc.slot.assign(static_cast<std::size_t>(P), -1);
  if (static_cast<Eigen::Index>(cc.slot.size()) != P) throw std::invalid_argument("solver: column cache belongs to another design");
  const bool project_cols = !spline.empty();
  auto ensure = [&](Eigen::Index l) {
    if (cc.slot[l] >= 0) return cc.slot[l];
    Eigen::VectorXd c(n);
    X.column(l, c);
    if (project_cols) {
      Eigen::VectorXd mc = spline.project(c);
      cc.curv.push_back(c.dot(mc));
      cc.mcols.push_back(std::move(mc));
    } else {
      cc.curv.push_back(c.squaredNorm());
    }
    cc.cols.push_back(std::move(c));
    cc.slot[l] = static_cast<int>(cc.cols.size()) - 1;
    return cc.slot[l];
  };

  std::vector<char> in_active(static_cast<std::size_t>(P), 0);
  std::vector<Eigen::Index> active;
  auto activate = [&](Eigen::Index l) {
    if (in_active[l]) return;
    in_active[l] = 1;
    active.push_back(l);
  };
  for (Eigen::Index l = 0; l < P; ++l) {
    if (is_pinned(weights[l])) continue;
    if (theta[l] != 0.0 || weights[l] == 0.0) activate(l);
  }

  auto objective = [&]() {
    double l1 = 0.0;
    for (Eigen::Index l : active) {
      if (theta[l] != 0.0) l1 += weights[l] * std::abs(theta[l]);
    }
    const double fit_term = project_cols ? u.dot(v) : v.squaredNorm();
    return 0.5 * fit_term / dn + lambda * l1;
  };

  auto kkt = [&](const Eigen::VectorXd& grad) {
    double worst = 0.0;
    for (Eigen::Index l = 0; l < P; ++l) {
      const double w = weights[l];
      if (is_pinned(w)) continue;
      double viol;
      if (w == 0.0) {
        viol = std::abs(grad[l]);
      } else if (theta[l] != 0.0) {
        viol = std::abs(grad[l] - lambda * w * (theta[l] > 0 ? 1.0 : -1.0));
      } else {
        viol = std::max(0.0, std::abs(grad[l]) - lambda * w);
      }
      worst = std::max(worst, viol);
    }
    return worst;
  };

  double prev = objective();
  fit.objective_trace.push_back(prev);
  const double curv_floor = 1e-14 * dn;

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    std::sort(active.begin(), active.end());
    for (Eigen::Index l : active) {
      const int s = ensure(l);
      const double c = cc.curv[s];
      if (!(c > curv_floor)) continue;
      const Eigen::VectorXd& col = cc.cols[s];
      const double z = col.dot(v) + c * theta[l];
      const double next = weights[l] == 0.0 ? z / c : soft_threshold(z, dn * lambda * weights[l]) / c;
      const double delta = next - theta[l];
      if (delta == 0.0) continue;
      if (project_cols) {
        v.noalias() -= delta * cc.mcols[s];
        u.noalias() -= delta * col;
      } else {
        v.noalias() -= delta * col;
      }
      theta[l] = next;
    }
    fit.iterations = iter;
    const double obj = objective();
    fit.objective_trace.push_back(obj);
    const double change = (prev - obj) / std::max(1.0, std::abs(obj));
    prev = obj;
    if (change >= options.tol) continue;

    const Eigen::VectorXd grad = X.transpose_times(v) / dn;
    bool added = false;
    for (Eigen::Index l = 0; l < P; ++l) {
      if (in_active[l] || is_pinned(weights[l])) continue;
      if (std::abs(grad[l]) - lambda * weights[l] > options.kkt_tol) {
        activate(l);
        added = true;
      }
    }
    if (added) continue;
    fit.kkt_residual = kkt(grad);
    if (fit.kkt_residual <= options.kkt_tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) fit.kkt_residual = kkt(X.transpose_times(v) / dn);

  fit.theta_hat = std::move(theta);
  fit.psi_hat = spline.empty() ? Eigen::VectorXd() : spline.solve(u);
  fit.residual = std::move(v);
  fit.objective = prev;
  return fit;
}

/// A self-contained dense problem instance.
struct PenalizedProblem {
  Eigen::VectorXd y;
  Eigen::MatrixXd Btilde;  // n x q, q may be 0
  Eigen::MatrixXd D;       // q x q
  Eigen::MatrixXd Xtilde;  // n x np
  double rho = 0.0;
  double lambda = 0.0;
  Eigen::VectorXd penalty_weights;
  double ridge_factor = 2.0;
};

FitResult block_coordinate_descent(const PenalizedProblem& problem, const SolverOptions& options = {});

}  // namespace shaplm
