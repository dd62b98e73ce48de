#include "oracles.hpp"
#include "properties.hpp"
#include "shaplm/metrics.hpp"
#include "shaplm/solver.hpp"
#include "shaplm/tree_solver.hpp"

#include <doctest.h>

#include <Eigen/QR>

#include <limits>
#include <numeric>
#include <random>

using namespace shaplm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd normal_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> z;
  MatrixXd m(r, c);
  for (auto& v : m.reshaped()) v = z(rng);
  return m;
}

MatrixXd orthonormal(std::mt19937_64& rng, int r, int c) {
  const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(normal_matrix(rng, r, c)).householderQ();
  return q.leftCols(c);
}

}  // namespace

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  CHECK(soft_threshold(-0.5, 1.0) == 0.0);
  CHECK(soft_threshold(-4.0, 1.5) == -2.5);
  CHECK(soft_threshold(0.7, 0.0) == 0.7);
}

TEST_CASE("spline block solve") {
  std::mt19937_64 rng(1);
  const MatrixXd B = orthonormal(rng, 12, 4);
  const MatrixXd D = MatrixXd::Identity(4, 4);
  const VectorXd r = normal_matrix(rng, 12, 1);
  CHECK((solve_spline_block(B, D, 0.0, r) - B.transpose() * r).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(solve_spline_block(B, D, 0.3, VectorXd::Zero(12)).isZero());

  // The gradient at the solution vanishes; central differences are exact for quadratics.
  const MatrixXd Bg = normal_matrix(rng, 15, 5);
  const MatrixXd A = normal_matrix(rng, 5, 5);
  const MatrixXd Dg = A * A.transpose();
  const VectorXd u = normal_matrix(rng, 15, 1);
  const double rho = 0.02;
  const VectorXd psi = solve_spline_block(Bg, Dg, rho, u);
  auto f = [&](const VectorXd& p) { return 0.5 * (u - Bg * p).squaredNorm() / 15.0 + rho * p.dot(Dg * p); };
  const double h = 1e-4;
  for (int j = 0; j < 5; ++j) {
    VectorXd e = VectorXd::Zero(5);
    e[j] = h;
    CHECK(std::abs((f(psi + e) - f(psi - e)) / (2 * h)) < 1e-10);
  }
  CHECK_THROWS_AS(solve_spline_block(MatrixXd::Zero(4, 2), MatrixXd::Zero(2, 2), 0.0, VectorXd::Zero(4)), NumericalError);
}

TEST_CASE("ridge block jitter") {
  // Rank-deficient Gram matrix: the block must still factor.
  const RidgeBlock rb(MatrixXd::Ones(6, 2), MatrixXd::Zero(2, 2), 0.0);
  CHECK(rb.jitter() > 0);
  CHECK(rb.df() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("oracle fit closed form") {
  std::mt19937_64 rng(2);
  const MatrixXd E = orthonormal(rng, 20, 5);
  const VectorXd y = normal_matrix(rng, 20, 1);
  CHECK((oracle_fit(E, MatrixXd::Identity(5, 5), 0.0, y) - E.transpose() * y).cwiseAbs().maxCoeff() < 1e-12);
  const MatrixXd G = normal_matrix(rng, 20, 5);
  const VectorXd c = normal_matrix(rng, 5, 1);
  CHECK((oracle_fit(G, MatrixXd::Identity(5, 5), 0.0, G * c) - c).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("coordinate descent closed forms") {
  std::mt19937_64 rng(3);
  SUBCASE("single orthonormal column") {
    const int n = 10;
    VectorXd x = normal_matrix(rng, n, 1);
    x.normalize();
    const VectorXd y = normal_matrix(rng, n, 1);
    for (double lambda : {0.0, 0.01, 0.05, 1.0}) {
      PenalizedProblem pr;
      pr.y = y;
      pr.Xtilde = x;
      pr.lambda = lambda;
      pr.penalty_weights = VectorXd::Ones(1);
      const auto fit = block_coordinate_descent(pr);
      CHECK(fit.converged);
      CHECK(fit.theta_hat[0] == doctest::Approx(soft_threshold(x.dot(y), n * lambda)).epsilon(1e-12));
    }
  }
  SUBCASE("huge lambda leaves only the unpenalized coordinates") {
    auto inst = props::random_solver_instance(7);
    inst.problem.lambda = 1e6;
    SolverOptions tight;
    tight.tol = 1e-14;
    tight.kkt_tol = 1e-10;
    tight.max_iter = 100000;
    const auto fit = block_coordinate_descent(inst.problem, tight);
    CHECK(fit.converged);
    const VectorXd& w = inst.problem.penalty_weights;
    for (Eigen::Index l = 0; l < w.size(); ++l) {
      if (w[l] > 0) CHECK(fit.theta_hat[l] == 0.0);
    }
    // Remaining fit: spline plus the two means, solved directly.
    const Eigen::Index n = inst.problem.y.size(), q = inst.problem.Btilde.cols();
    MatrixXd E(n, q + 2);
    E << inst.problem.Btilde, inst.problem.Xtilde.col(n - 1), inst.problem.Xtilde.col(2 * n - 1);
    MatrixXd Dt = MatrixXd::Zero(q + 2, q + 2);
    Dt.topLeftCorner(q, q) = inst.problem.D;
    const VectorXd ref = oracle_fit(E, Dt, inst.problem.rho, inst.problem.y, inst.problem.ridge_factor);
    INFO(fit.theta_hat[n - 1] << " vs " << ref[q] << ", " << fit.theta_hat[2 * n - 1] << " vs " << ref[q + 1]);
    CHECK(std::abs(fit.theta_hat[n - 1] - ref[q]) < 1e-6);
    CHECK(std::abs(fit.theta_hat[2 * n - 1] - ref[q + 1]) < 1e-6);
  }
}

TEST_CASE("coordinate descent invariants") {
  for (std::uint64_t seed = 20; seed < 26; ++seed) {
    const auto inst = props::random_solver_instance(seed, 40, 2, 6, true);
    const auto& pr = inst.problem;
    const auto fit = block_coordinate_descent(pr);
    REQUIRE(fit.converged);
    CHECK(fit.kkt_residual < 1e-6);
    for (std::size_t t = 1; t < fit.objective_trace.size(); ++t) {
      CHECK(fit.objective_trace[t] <= fit.objective_trace[t - 1] + 1e-12);
    }
    for (Eigen::Index l = 0; l < pr.penalty_weights.size(); ++l) {
      if (std::isinf(pr.penalty_weights[l])) CHECK(fit.theta_hat[l] == 0.0);
    }
    CHECK(fit.objective == doctest::Approx(oracle::objective(pr, fit.psi_hat, fit.theta_hat)).epsilon(1e-10));

    // Reversing the column order gives the same minimizer.
    PenalizedProblem rev = pr;
    const Eigen::Index P = pr.Xtilde.cols();
    for (Eigen::Index l = 0; l < P; ++l) {
      rev.Xtilde.col(l) = pr.Xtilde.col(P - 1 - l);
      rev.penalty_weights[l] = pr.penalty_weights[P - 1 - l];
    }
    SolverOptions tight;
    tight.tol = 1e-14;
    tight.kkt_tol = 1e-10;
    tight.max_iter = 100000;
    const auto fr = block_coordinate_descent(rev, tight);
    const auto ft = block_coordinate_descent(pr, tight);
    for (Eigen::Index l = 0; l < P; ++l) CHECK(std::abs(fr.theta_hat[P - 1 - l] - ft.theta_hat[l]) < 1e-6);
  }
}

TEST_CASE("tree blocks agree with coordinate descent") {
  for (std::uint64_t seed = 40; seed < 46; ++seed) {
    const auto inst = props::random_solver_instance(seed, 60, 2, 6, seed % 2 == 0);
    const auto& pr = inst.problem;
    SolverOptions tight;
    tight.tol = 1e-12;
    tight.kkt_tol = 1e-9;
    tight.max_iter = 100000;
    const auto generic = block_coordinate_descent(pr, tight);
    const TreeDesign design(inst.X, inst.transforms);
    const RidgeBlock ridge(pr.Btilde, pr.D, pr.rho, pr.ridge_factor);
    const auto tree = block_coordinate_descent(design, ridge, pr.y, pr.lambda, pr.penalty_weights, tight);
    INFO("iterations " << generic.iterations << " kkt " << generic.kkt_residual << " / " << tree.iterations << " kkt " << tree.kkt_residual);
    REQUIRE(generic.converged);
    REQUIRE(tree.converged);
    CHECK((tree.theta_hat - generic.theta_hat).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((tree.psi_hat - generic.psi_hat).cwiseAbs().maxCoeff() < 1e-5);
    CHECK(std::abs(tree.objective - generic.objective) < 1e-10);
    // The zero patterns (hence the clusters) match.
    int differ = 0;
    for (Eigen::Index l = 0; l < pr.Xtilde.cols(); ++l) differ += (tree.theta_hat[l] == 0.0) != (generic.theta_hat[l] == 0.0);
    CHECK(differ == 0);
  }
}

TEST_CASE("tree fused lasso satisfies its optimality conditions") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + rep % 30;
    std::vector<std::pair<int, int>> edges;
    for (int v = 1; v < n; ++v) edges.emplace_back(v, int(rng() % v));
    const SpanningTree tree(n, edges, int(rng() % n));
    VectorXd a(n), b(n), gamma(n - 1);
    for (int i = 0; i < n; ++i) {
      // A vertex with a_i = 0 and b_i != 0 can make the problem unbounded, so
      // flat vertices carry no linear term.
      const bool flat = u(rng) < 0.2;
      a[i] = flat ? 0.0 : 0.1 + u(rng);
      b[i] = flat ? 0.0 : 4 * u(rng) - 2;
    }
    a[0] = 1.0;
    for (int l = 0; l < n - 1; ++l) {
      const double kind = u(rng);
      gamma[l] = kind < 0.1 ? std::numeric_limits<double>::infinity() : kind < 0.25 ? 0.0 : 0.5 * u(rng);
    }
    const VectorXd beta = tree_fused_lasso(tree, a, b, gamma);
    CHECK(oracle::tree_kkt_violation(tree, a, b, gamma, beta) < 1e-9);
  }
}

TEST_CASE("tree fused lasso without penalties decouples") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0, 1);
  for (int n : {2, 5, 20, 60}) {
    std::vector<std::pair<int, int>> edges;
    for (int v = 1; v < n; ++v) edges.emplace_back(v, int(rng() % v));
    const SpanningTree tree(n, edges, int(rng() % n));
    VectorXd a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = 0.01 + u(rng);
      b[i] = u(rng) - 0.5;
    }
    const VectorXd beta = tree_fused_lasso(tree, a, b, VectorXd::Zero(n - 1));
    CHECK((beta.array() - b.array() / a.array()).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("solver input validation") {
  PenalizedProblem pr;
  pr.y = VectorXd::Zero(3);
  pr.Xtilde = MatrixXd::Ones(3, 2);
  pr.penalty_weights = VectorXd::Ones(1);
  CHECK_THROWS(block_coordinate_descent(pr));
  pr.penalty_weights = VectorXd::Ones(2);
  pr.lambda = -1;
  CHECK_THROWS(block_coordinate_descent(pr));
}

TEST_CASE("non-convergence is reported") {
  auto inst = props::random_solver_instance(50);
  SolverOptions opts;
  opts.max_iter = 1;
  opts.tol = 0.0;
  const auto fit = block_coordinate_descent(inst.problem, opts);
  CHECK_FALSE(fit.converged);
  CHECK(fit.iterations == 1);
  CHECK(std::isfinite(fit.kkt_residual));
}
