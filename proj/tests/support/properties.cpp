#include "properties.hpp"

#include "oracles.hpp"
#include "shaplm/bernstein.hpp"
#include "shaplm/geometry.hpp"
#include "shaplm/metrics.hpp"
#include "shaplm/simulate.hpp"
#include "shaplm/tree_solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

namespace props {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using shaplm::Point2;

namespace {

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

CheckResult verdict(const std::string& name, double worst, double tol, const std::string& what) {
  return {name, worst <= tol, what + " " + sci(worst) + " (tol " + sci(tol) + ")"};
}

CheckResult combine(const std::string& name, const std::vector<CheckResult>& parts) {
  CheckResult out{name, true, ""};
  for (const auto& p : parts) {
    out.pass = out.pass && p.pass;
    out.detail += (out.detail.empty() ? "" : "; ") + p.detail;
  }
  return out;
}

std::vector<Point2> uniform_points(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) {
    const double x = u(rng);
    pts.emplace_back(x, u(rng));
  }
  return pts;
}

// Small meshes: two uniform grids and an irregular Delaunay mesh over the unit square.
std::vector<std::shared_ptr<const shaplm::TriangulationMesh>> test_meshes() {
  std::vector<std::shared_ptr<const shaplm::TriangulationMesh>> out;
  out.push_back(std::make_shared<shaplm::TriangulationMesh>(shaplm::mesh_uniform_rect({}, 1)));
  out.push_back(std::make_shared<shaplm::TriangulationMesh>(shaplm::mesh_uniform_rect({}, 2)));
  std::mt19937_64 rng(17);
  auto pts = uniform_points(rng, 8);
  for (const Point2& c : {Point2(0, 0), Point2(1, 0), Point2(0, 1), Point2(1, 1)}) pts.push_back(c);
  out.push_back(std::make_shared<shaplm::TriangulationMesh>(shaplm::delaunay(pts).mesh));
  return out;
}

// Uniform point inside triangle t.
Point2 point_in(const shaplm::TriangulationMesh& mesh, int t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double a = u(rng), b = u(rng);
  if (a + b > 1) {
    a = 1 - a;
    b = 1 - b;
  }
  return (1 - a - b) * mesh.vertex(t, 0) + a * mesh.vertex(t, 1) + b * mesh.vertex(t, 2);
}

MatrixXd random_normal(std::mt19937_64& rng, Index r, Index c) {
  std::normal_distribution<double> z;
  MatrixXd m(r, c);
  for (Index j = 0; j < c; ++j) {
    for (Index i = 0; i < r; ++i) m(i, j) = z(rng);
  }
  return m;
}

// Random labelled tree by attaching each vertex of a random order to an earlier one.
shaplm::SpanningTree random_tree(int n, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::pair<int, int>> edges;
  for (int v = 1; v < n; ++v) {
    std::uniform_int_distribution<int> pick(0, v - 1);
    edges.emplace_back(order[v], order[pick(rng)]);
  }
  std::shuffle(edges.begin(), edges.end(), rng);
  return shaplm::SpanningTree(n, std::move(edges));
}

}  // namespace

CheckResult bernstein_identities() {
  std::mt19937_64 rng(1);
  double worst_sum = 0.0, worst_vertex = 0.0;
  for (const auto& mesh : test_meshes()) {
    for (int d : {1, 2, 3, 5, 7}) {
      const shaplm::SplineBasisSpec spec{d, 0};
      std::vector<Point2> pts;
      for (int i = 0; i < 1000; ++i) {
        pts.push_back(point_in(*mesh, int(rng() % mesh->num_triangles()), rng));
      }
      const MatrixXd B = shaplm::eval_basis(*mesh, spec, pts);
      worst_sum = std::max(worst_sum, (B.rowwise().sum().array() - 1.0).abs().maxCoeff());
      // At vertex k only the pure power b_k^d survives.
      for (int k = 0; k < 3; ++k) {
        shaplm::Barycentric b = shaplm::Barycentric::Zero();
        b[k] = 1.0;
        const VectorXd v = shaplm::bernstein_values<double>(d, b);
        std::array<int, 3> e{0, 0, 0};
        e[k] = d;
        const int at = shaplm::local_index(d, e[0], e[1]);
        for (Index m = 0; m < v.size(); ++m) worst_vertex = std::max(worst_vertex, std::abs(v[m] - (m == at ? 1.0 : 0.0)));
      }
    }
  }
  return combine("bernstein identities", {verdict("", worst_sum, 1e-12, "partition of unity"),
                                          verdict("", worst_vertex, 1e-12, "vertex basis")});
}

CheckResult polynomial_reproduction() {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  double worst_value = 0.0, worst_k = 0.0;
  for (const auto& mesh : test_meshes()) {
    for (int d : {2, 3, 5}) {
      const shaplm::SplineBasisSpec spec{d, 1};
      const MatrixXd K = shaplm::build_constraints(*mesh, spec);
      for (int deg = 0; deg <= d; ++deg) {
        // Random polynomial of total degree deg.
        std::vector<std::array<double, 3>> terms;
        for (int a = 0; a <= deg; ++a) {
          for (int b = 0; a + b <= deg; ++b) terms.push_back({double(a), double(b), z(rng)});
        }
        auto f = [&](const Point2& p) {
          double s = 0.0;
          for (const auto& t : terms) s += t[2] * std::pow(p.x() - 0.4, t[0]) * std::pow(p.y() - 0.6, t[1]);
          return s;
        };
        const VectorXd alpha = oracle::interpolate(*mesh, d, f);
        const shaplm::SplineFunction fn(mesh, spec, alpha);
        for (int i = 0; i < 200; ++i) {
          const Point2 p = point_in(*mesh, int(rng() % mesh->num_triangles()), rng);
          worst_value = std::max(worst_value, std::abs(fn.value(p) - f(p)));
        }
        if (K.rows() > 0) worst_k = std::max(worst_k, (K * alpha).cwiseAbs().maxCoeff());
      }
    }
  }
  return combine("polynomial reproduction", {verdict("", worst_value, 1e-9, "value error"),
                                             verdict("", worst_k, 1e-8, "|K alpha|")});
}

CheckResult cross_edge_continuity() {
  std::mt19937_64 rng(3);
  double worst_value = 0.0, worst_grad = 0.0;
  for (const auto& mesh : test_meshes()) {
    for (int d : {5, 6}) {
      const shaplm::SplineBasisSpec spec{d, 1};
      const MatrixXd K = shaplm::build_constraints(*mesh, spec);
      const MatrixXd P = shaplm::build_energy(*mesh, spec);
      const MatrixXd B(0, K.cols());
      const auto rp = shaplm::reparameterize(B, K, P);
      for (int trial = 0; trial < 5; ++trial) {
        VectorXd alpha = rp.Q2 * random_normal(rng, rp.Q2.cols(), 1);
        alpha /= alpha.cwiseAbs().maxCoeff();
        const shaplm::SplineFunction fn(mesh, spec, alpha);
        for (const auto& e : mesh->shared_edges()) {
          const Point2& a = mesh->vertices()[e.v_lo];
          const Point2& b = mesh->vertices()[e.v_hi];
          for (int k = 0; k < 10; ++k) {
            const double t = (k + 0.5) / 10.0;
            const Point2 p = (1 - t) * a + t * b;
            worst_value = std::max(worst_value, std::abs(fn.value_on(e.tri_a, p) - fn.value_on(e.tri_b, p)));
            worst_grad = std::max(worst_grad, (fn.gradient_on(e.tri_a, p) - fn.gradient_on(e.tri_b, p)).cwiseAbs().maxCoeff());
          }
        }
      }
    }
  }
  return combine("cross-edge continuity", {verdict("", worst_value, 1e-9, "value jump"),
                                           verdict("", worst_grad, 1e-9, "gradient jump")});
}

CheckResult energy_matrix() {
  std::mt19937_64 rng(4);
  double worst_sym = 0.0, worst_psd = 0.0, worst_linear = 0.0, worst_linear_rel = 0.0, worst_quad = 0.0;
  auto meshes = test_meshes();
  // The default fitting mesh joins the set; the absolute bound on linear
  // energy applies to the uniform meshes, and a bound relative to |P| to all
  // (the random Delaunay mesh has a sliver with entries near 1e6).
  meshes.insert(meshes.begin() + 2, std::make_shared<shaplm::TriangulationMesh>(shaplm::mesh_uniform_rect({}, 4)));
  for (std::size_t mesh_id = 0; mesh_id < meshes.size(); ++mesh_id) {
    const auto& mesh = meshes[mesh_id];
    for (int d : {2, 3, 5}) {
      const shaplm::SplineBasisSpec spec{d, 1};
      const MatrixXd P = shaplm::build_energy(*mesh, spec);
      const double scale = P.cwiseAbs().maxCoeff();
      worst_sym = std::max(worst_sym, (P - P.transpose()).cwiseAbs().maxCoeff() / scale);
      const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(P, Eigen::EigenvaluesOnly).eigenvalues();
      worst_psd = std::max(worst_psd, std::max(0.0, -ev.minCoeff()) / ev.maxCoeff());
      const VectorXd lin = oracle::interpolate(*mesh, d, [](const Point2& p) { return 0.3 - 1.7 * p.x() + 2.2 * p.y(); });
      const double e_lin = std::abs(lin.dot(P * lin));
      if (mesh_id < 3) worst_linear = std::max(worst_linear, e_lin);
      worst_linear_rel = std::max(worst_linear_rel, e_lin / (scale * lin.squaredNorm()));
      for (int trial = 0; trial < 3; ++trial) {
        const VectorXd alpha = random_normal(rng, P.rows(), 1);
        const double e = alpha.dot(P * alpha);
        const double ref = oracle::energy_quadrature(shaplm::SplineFunction(mesh, spec, alpha));
        worst_quad = std::max(worst_quad, std::abs(e - ref) / std::abs(ref));
      }
    }
  }
  return combine("energy matrix", {verdict("", worst_sym, 1e-12, "asymmetry"),
                                   verdict("", worst_psd, 1e-10, "negative eigenvalue"),
                                   verdict("", worst_linear, 1e-10, "linear energy"),
                                   verdict("", worst_linear_rel, 1e-14, "linear energy relative to max |P|"),
                                   verdict("", worst_quad, 1e-8, "quadrature mismatch")});
}

CheckResult tree_transform_inverse() {
  std::mt19937_64 rng(5);
  double worst_inv = 0.0, worst_round = 0.0, worst_fwd = 0.0, worst_id = 0.0, worst_design = 0.0;
  for (int n : {2, 3, 4, 5, 8, 13, 21, 34, 64}) {
    for (int rep = 0; rep < 5; ++rep) {
      const shaplm::TreeTransform tt(random_tree(n, rng));
      const MatrixXd Ht = tt.dense_Htilde();
      const MatrixXd Hinv = Ht.fullPivLu().inverse();
      worst_id = std::max(worst_id, (Ht * Hinv - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
      for (int k = 0; k < 20; ++k) {
        const VectorXd v = random_normal(rng, n, 1);
        worst_inv = std::max(worst_inv, (tt.apply_inverse(v) - Hinv * v).cwiseAbs().maxCoeff());
        worst_fwd = std::max(worst_fwd, (tt.apply(v) - Ht * v).cwiseAbs().maxCoeff());
        worst_round = std::max(worst_round, (tt.apply_inverse(tt.apply(v)) - v).cwiseAbs().maxCoeff());
      }
      if (n <= 8) {
        const int p = 2;
        const MatrixXd X = random_normal(rng, n, p);
        std::vector<shaplm::TreeTransform> tts{tt, shaplm::TreeTransform(random_tree(n, rng))};
        MatrixXd dense = MatrixXd::Zero(n, n * p);
        for (int k = 0; k < p; ++k) {
          dense.block(0, k * n, n, n) = X.col(k).asDiagonal() * tts[k].dense_Htilde().fullPivLu().inverse();
        }
        worst_design = std::max(worst_design, (shaplm::build_design(X, tts) - dense).cwiseAbs().maxCoeff());
      }
    }
  }
  return combine("tree transform", {verdict("", worst_inv, 1e-10, "inverse vs dense LU"),
                                    verdict("", worst_fwd, 1e-10, "forward vs dense"),
                                    verdict("", worst_round, 1e-10, "round trip"),
                                    verdict("", worst_id, 1e-10, "Htilde Htilde^-1 - I"),
                                    verdict("", worst_design, 1e-10, "design vs dense product")});
}

CheckResult mst_brute_force() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int graphs = 0, mismatches = 0;
  double worst = 0.0;
  for (int n = 2; n <= 6; ++n) {
    for (const auto& edge_list : oracle::connected_graphs(n)) {
      ++graphs;
      for (int draw = 0; draw < 100; ++draw) {
        std::vector<shaplm::WeightedEdge> edges;
        for (const auto& [i, j] : edge_list) edges.push_back({i, j, u(rng)});
        const shaplm::SpatialGraph g(n, edges);
        const auto tree = shaplm::mst(g);
        const auto brute = oracle::brute_force_mst(g);
        double w = 0.0;
        std::vector<std::pair<int, int>> got;
        for (const auto& [a, b] : tree.edges()) {
          got.emplace_back(std::min(a, b), std::max(a, b));
          for (const auto& e : edges) {
            if (std::min(e.i, e.j) == got.back().first && std::max(e.i, e.j) == got.back().second) w += e.weight;
          }
        }
        std::sort(got.begin(), got.end());
        worst = std::max(worst, std::abs(w - brute.weight));
        mismatches += got != brute.edges;
      }
    }
  }
  CheckResult r = verdict("mst vs enumeration", worst, 1e-12, "weight gap");
  r.pass = r.pass && mismatches == 0;
  r.detail = std::to_string(graphs) + " graphs x 100 draws, " + std::to_string(mismatches) + " edge-set mismatches, " + r.detail;
  return r;
}

SolverInstance random_solver_instance(std::uint64_t seed, int n, int p, int q, bool pins) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto locations = uniform_points(rng, n);
  const shaplm::SpatialGraph graph = shaplm::delaunay_graph(locations);
  SolverInstance inst;
  inst.X = random_normal(rng, n, p);
  for (int k = 0; k < p; ++k) inst.transforms.emplace_back(shaplm::random_spanning_tree(graph, rng()));
  // Two-valued coefficients split by a random line, so some differences are real.
  MatrixXd beta(n, p);
  for (int k = 0; k < p; ++k) {
    const double a = u(rng) * 2 * M_PI, c = u(rng) - 0.5;
    for (int i = 0; i < n; ++i) {
      const double side = std::cos(a) * (locations[i].x() - 0.5) + std::sin(a) * (locations[i].y() - 0.5);
      beta(i, k) = side > c ? 1.0 : -1.0;
    }
  }
  auto& pr = inst.problem;
  pr.Xtilde = shaplm::build_design(inst.X, inst.transforms);
  pr.Btilde = random_normal(rng, n, q);
  const MatrixXd A = random_normal(rng, q, q);
  pr.D = A * A.transpose() / double(q);
  pr.rho = 0.01;
  VectorXd y = 0.5 * random_normal(rng, n, 1) + pr.Btilde * random_normal(rng, q, 1);
  for (int k = 0; k < p; ++k) y += inst.X.col(k).cwiseProduct(beta.col(k));
  pr.y = y;
  pr.penalty_weights = VectorXd::Ones(n * p);
  for (int k = 0; k < p; ++k) pr.penalty_weights[(k + 1) * n - 1] = 0.0;
  if (pins) {
    for (int k = 0; k < p; ++k) {
      for (int l = 0; l + 1 < n; ++l) {
        if (u(rng) < 0.1) pr.penalty_weights[k * n + l] = std::numeric_limits<double>::infinity();
      }
    }
  }
  double gmax = 0.0;
  const VectorXd g = pr.Xtilde.transpose() * pr.y / double(n);
  for (Index l = 0; l < g.size(); ++l) {
    if (pr.penalty_weights[l] > 0 && std::isfinite(pr.penalty_weights[l])) gmax = std::max(gmax, std::abs(g[l]));
  }
  pr.lambda = (0.02 + 0.2 * u(rng)) * gmax;
  return inst;
}

namespace {

// Largest subgradient violation of a candidate solution, computed from scratch.
double kkt_violation(const shaplm::PenalizedProblem& pr, const VectorXd& psi, const VectorXd& theta) {
  const double n = double(pr.y.size());
  const VectorXd r = pr.y - pr.Btilde * psi - pr.Xtilde * theta;
  const VectorXd gpsi = -pr.Btilde.transpose() * r / n + pr.ridge_factor * pr.rho * pr.D * psi;
  double worst = gpsi.cwiseAbs().maxCoeff();
  const VectorXd g = pr.Xtilde.transpose() * r / n;
  for (Index l = 0; l < theta.size(); ++l) {
    const double w = pr.penalty_weights[l];
    if (std::isinf(w)) {
      worst = std::max(worst, std::abs(theta[l]));
    } else if (w == 0.0) {
      worst = std::max(worst, std::abs(g[l]));
    } else if (theta[l] != 0.0) {
      worst = std::max(worst, std::abs(g[l] - pr.lambda * w * (theta[l] > 0 ? 1.0 : -1.0)));
    } else {
      worst = std::max(worst, std::abs(g[l]) - pr.lambda * w);
    }
  }
  return worst;
}

}  // namespace

CheckResult solver_against_prox_oracle() {
  double worst_gap = 0.0, worst_kkt = 0.0, worst_rise = 0.0, worst_tree_gap = 0.0;
  int not_converged = 0;
  for (int inst_id = 0; inst_id < 20; ++inst_id) {
    const auto inst = random_solver_instance(100 + inst_id, 40, 2, 6, inst_id % 2 == 1);
    const auto& pr = inst.problem;
    const auto prox = oracle::proximal_gradient(pr);
    auto check = [&](const shaplm::FitResult& fit, double& gap) {
      not_converged += !fit.converged;
      gap = std::max(gap, oracle::objective(pr, fit.psi_hat, fit.theta_hat) - prox.objective);
      worst_kkt = std::max(worst_kkt, kkt_violation(pr, fit.psi_hat, fit.theta_hat));
      for (std::size_t t = 1; t < fit.objective_trace.size(); ++t) {
        worst_rise = std::max(worst_rise, fit.objective_trace[t] - fit.objective_trace[t - 1]);
      }
    };
    check(shaplm::block_coordinate_descent(pr), worst_gap);
    const shaplm::TreeDesign design(inst.X, inst.transforms);
    const shaplm::RidgeBlock ridge(pr.Btilde, pr.D, pr.rho, pr.ridge_factor);
    check(shaplm::block_coordinate_descent(design, ridge, pr.y, pr.lambda, pr.penalty_weights), worst_tree_gap);
  }
  auto r = combine("solver vs proximal-gradient oracle",
                   {verdict("", worst_gap, 1e-8, "objective gap (coordinate)"),
                    verdict("", worst_tree_gap, 1e-8, "objective gap (tree blocks)"),
                    verdict("", worst_kkt, 1e-6, "KKT residual"),
                    verdict("", worst_rise, 1e-12, "objective increase")});
  r.pass = r.pass && not_converged == 0;
  r.detail = "20 instances, " + std::to_string(not_converged) + " not converged; " + r.detail;
  return r;
}

CheckResult oracle_fit_restricted() {
  double worst = 0.0;
  for (int inst_id = 0; inst_id < 10; ++inst_id) {
    auto inst = random_solver_instance(300 + inst_id);
    auto& pr = inst.problem;
    const Index n = pr.y.size(), P = pr.Xtilde.cols(), q = pr.Btilde.cols();
    // Support: both mean coordinates and a few edge coordinates.
    std::vector<Index> support{n - 1, 2 * n - 1, 3, 11, n + 5, n + 20};
    pr.lambda = 0.0;
    pr.penalty_weights = VectorXd::Constant(P, std::numeric_limits<double>::infinity());
    for (Index l : support) pr.penalty_weights[l] = 0.0;
    shaplm::SolverOptions tight;
    tight.tol = 0.0;
    tight.kkt_tol = 1e-13;
    tight.max_iter = 100000;
    const auto fit = shaplm::block_coordinate_descent(pr, tight);
    const Index s = Index(support.size());
    MatrixXd E(n, q + s);
    E.leftCols(q) = pr.Btilde;
    for (Index j = 0; j < s; ++j) E.col(q + j) = pr.Xtilde.col(support[j]);
    MatrixXd Dt = MatrixXd::Zero(q + s, q + s);
    Dt.topLeftCorner(q, q) = pr.D;
    const VectorXd ref = shaplm::oracle_fit(E, Dt, pr.rho, pr.y, pr.ridge_factor);
    worst = std::max(worst, (fit.psi_hat - ref.head(q)).cwiseAbs().maxCoeff());
    for (Index j = 0; j < s; ++j) worst = std::max(worst, std::abs(fit.theta_hat[support[j]] - ref[q + j]));
  }
  return verdict("oracle fit vs restricted solver", worst, 1e-6, "coefficient gap");
}

CheckResult gp_empirical_covariance() {
  const std::vector<Point2> pts{{0.0, 0.0}, {0.1, 0.05}, {0.3, 0.2}, {0.7, 0.4}, {0.9, 0.95}};
  const shaplm::GpSpec spec{0.5, 1.0, 1e-10};
  const int draws = 10000;
  MatrixXd S = MatrixXd::Zero(5, 5);
  for (int k = 0; k < draws; ++k) {
    const VectorXd z = shaplm::sample_gp(pts, spec, 7000 + std::uint64_t(k));
    S += z * z.transpose();
  }
  S /= double(draws);
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) worst = std::max(worst, std::abs(S(i, j) - std::exp(-(pts[i] - pts[j]).norm() / spec.range)));
  }
  return verdict("GP empirical covariance", worst, 0.05, "max entry error over 10000 draws");
}

CheckResult metrics_brute_force() {
  // Every set partition of n <= 5 elements as a restricted growth string.
  std::vector<std::vector<int>> parts;
  std::function<void(std::vector<int>&, int, int)> grow = [&](std::vector<int>& s, int n, int top) {
    if (int(s.size()) == n) {
      parts.push_back(s);
      return;
    }
    for (int l = 0; l <= top + 1; ++l) {
      s.push_back(l);
      grow(s, n, std::max(top, l));
      s.pop_back();
    }
  };
  int cases = 0, ri_mismatch = 0, mse_mismatch = 0;
  for (int n = 2; n <= 5; ++n) {
    parts.clear();
    std::vector<int> s{0};
    grow(s, n, 0);
    for (const auto& a : parts) {
      for (const auto& b : parts) {
        // Relabel b to check that label values do not matter.
        shaplm::Partition pa{a}, pb{b};
        for (auto& l : pb.labels) l = 7 - 3 * l;
        ++cases;
        ri_mismatch += shaplm::rand_index(pa, pb) != oracle::rand_index_pairs(pa, pb);
      }
    }
  }
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> q(-12, 12);
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + t % 7, p = 1 + t % 3;
    MatrixXd a(n, p), b(n, p);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < p; ++k) {
        a(i, k) = q(rng) / 4.0;
        b(i, k) = q(rng) / 4.0;
      }
    }
    mse_mismatch += shaplm::mse_beta(a, b) != oracle::mse_loop(a, b);
    mse_mismatch += shaplm::mse_g(a.col(0), b.col(0)) != oracle::mse_loop(a.col(0), b.col(0));
  }
  CheckResult r{"metrics vs brute force", ri_mismatch == 0 && mse_mismatch == 0, ""};
  r.detail = std::to_string(cases) + " partition pairs, " + std::to_string(ri_mismatch) + " Rand index mismatches, " +
             std::to_string(mse_mismatch) + " MSE mismatches over 400 cases";
  return r;
}

std::vector<CheckResult> run_all() {
  return {bernstein_identities(),   polynomial_reproduction(),    cross_edge_continuity(),
          energy_matrix(),          tree_transform_inverse(),     mst_brute_force(),
          solver_against_prox_oracle(), oracle_fit_restricted(), gp_empirical_covariance(),
          metrics_brute_force()};
}

}  // namespace props
