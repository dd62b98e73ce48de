#include "shaplm/solver.hpp"

#include <Eigen/Dense>

namespace shaplm {

namespace {

// LLT that also rejects numerically semidefinite systems.
bool factor_pd(const Eigen::MatrixXd& G, Eigen::LLT<Eigen::MatrixXd>& chol) {
  chol.compute(G);
  if (chol.info() != Eigen::Success) return false;
  const double max_diag = G.diagonal().cwiseAbs().maxCoeff();
  const double min_pivot = chol.matrixLLT().diagonal().minCoeff();
  return min_pivot * min_pivot > 1e-13 * std::max(max_diag, 1e-300);
}

}  // namespace

RidgeBlock::RidgeBlock(const Eigen::MatrixXd& Btilde, const Eigen::MatrixXd& D, double rho,
                       double ridge_factor)
    : n_(Btilde.rows()), Btilde_(Btilde), D_(D), rho_(rho), factor_(ridge_factor) {
  if (!(rho >= 0)) throw std::invalid_argument("spline block: rho must be >= 0");
  if (D.rows() != Btilde.cols() || D.cols() != Btilde.cols()) {
    throw std::invalid_argument("spline block: D must be q x q with q = columns of Btilde");
  }
  if (Btilde.cols() == 0) return;
  Eigen::MatrixXd G = Btilde.transpose() * Btilde;
  G.noalias() += (factor_ * static_cast<double>(n_) * rho) * D;
  if (factor_pd(G, chol_)) return;
  const double base = std::max(G.diagonal().mean(), 1e-300);
  for (double rel = 1e-10; rel <= 1e-6 * 1.0001; rel *= 10) {
    jitter_ = rel * base;
    Eigen::MatrixXd Gj = G;
    Gj.diagonal().array() += jitter_;
    if (factor_pd(Gj, chol_)) return;
  }
  throw NumericalError("spline block: system is singular even after jitter");
}

Eigen::VectorXd RidgeBlock::solve(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  if (empty()) return Eigen::VectorXd();
  return chol_.solve(Btilde_.transpose() * u);
}

Eigen::MatrixXd RidgeBlock::gram_solve(const Eigen::MatrixXd& rhs) const {
  if (empty()) return Eigen::MatrixXd(0, rhs.cols());
  return chol_.solve(rhs);
}

Eigen::VectorXd RidgeBlock::project(const Eigen::Ref<const Eigen::VectorXd>& u) const {
  if (empty()) return u;
  return u - Btilde_ * solve(u);
}

double RidgeBlock::df() const {
  if (empty()) return 0.0;
  // Tr[B G^{-1} B'] = Tr[G^{-1} B'B]
  const Eigen::MatrixXd BtB = Btilde_.transpose() * Btilde_;
  return chol_.solve(BtB).trace();
}

double RidgeBlock::penalty(const Eigen::Ref<const Eigen::VectorXd>& psi) const {
  if (empty()) return 0.0;
  return 0.5 * factor_ * rho_ * psi.dot(D_ * psi);
}

Eigen::VectorXd solve_spline_block(const Eigen::MatrixXd& Btilde, const Eigen::MatrixXd& D,
                                   double rho, const Eigen::VectorXd& residual,
                                   double ridge_factor) {
  if (residual.size() != Btilde.rows()) throw std::invalid_argument("solve_spline_block: length mismatch");
  Eigen::MatrixXd G = Btilde.transpose() * Btilde;
  G.noalias() += (ridge_factor * static_cast<double>(Btilde.rows()) * rho) * D;
  Eigen::LLT<Eigen::MatrixXd> chol;
  if (!factor_pd(G, chol)) throw NumericalError("solve_spline_block: system is singular");
  return chol.solve(Btilde.transpose() * residual);
}

Eigen::VectorXd oracle_fit(const Eigen::MatrixXd& E, const Eigen::MatrixXd& Dtilde, double rho,
                           const Eigen::VectorXd& y, double ridge_factor) {
  if (y.size() != E.rows()) throw std::invalid_argument("oracle_fit: length mismatch");
  if (Dtilde.rows() != E.cols() || Dtilde.cols() != E.cols()) {
    throw std::invalid_argument("oracle_fit: Dtilde must match the columns of E");
  }
  Eigen::MatrixXd G = E.transpose() * E;
  G.noalias() += (ridge_factor * static_cast<double>(E.rows()) * rho) * Dtilde;
  Eigen::LLT<Eigen::MatrixXd> chol;
  if (!factor_pd(G, chol)) throw NumericalError("oracle_fit: system is singular");
  return chol.solve(E.transpose() * y);
}

FitResult block_coordinate_descent(const PenalizedProblem& problem, const SolverOptions& options) {
  const Eigen::Index n = problem.y.size();
  const RidgeBlock spline = problem.Btilde.cols() == 0
                                ? RidgeBlock(n)
                                : RidgeBlock(problem.Btilde, problem.D, problem.rho, problem.ridge_factor);
  return block_coordinate_descent(DenseDesign(problem.Xtilde), spline, problem.y, problem.lambda,
                                  problem.penalty_weights, options);
}

}  // namespace shaplm
