#include "shaplm/bernstein.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <iostream>
#include <stdexcept>

namespace shaplm {

namespace {

std::vector<double> factorials(int n) {
  std::vector<double> f(static_cast<std::size_t>(n + 1), 1.0);
  for (int i = 1; i <= n; ++i) f[i] = f[i - 1] * i;
  return f;
}

int index_of(int d, const std::array<int, 3>& e) { return local_index(d, e[0], e[1]); }

int local_position(const Triangle& t, int vertex) {
  for (int k = 0; k < 3; ++k) {
    if (t.v[k] == vertex) return k;
  }
  return -1;
}

// Barycentric coordinates of a direction vector u: they sum to zero.
Eigen::Vector3d direction_coords(const TriangulationMesh& mesh, int tri, const Eigen::Vector2d& u) {
  const Point2& v0 = mesh.vertex(tri, 0);
  Eigen::Vector3d a = mesh.barycentric(tri, v0 + u);
  a[0] -= 1.0;
  return a;
}

// Coefficients (degree d-2) of the second directional derivative D_u D_w,
// as a linear map from the degree-d coefficients of one triangle.
Eigen::MatrixXd second_derivative_map(int d, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const int m = local_dim(d), m2 = local_dim(d - 2);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m2, m);
  const double scale = static_cast<double>(d) * (d - 1);
  for (const auto& eta : bernstein_exponents(d - 2)) {
    const int row = index_of(d - 2, eta);
    for (int s = 0; s < 3; ++s) {
      for (int t = 0; t < 3; ++t) {
        auto e = eta;
        e[s] += 1;
        e[t] += 1;
        L(row, index_of(d, e)) += scale * a[s] * b[t];
      }
    }
  }
  return L;
}

}  // namespace

void SplineBasisSpec::validate() const {
  if (degree < 2) {
    throw std::invalid_argument("spline degree must be >= 2 (energy uses second derivatives)");
  }
  if (smoothness < 0) throw std::invalid_argument("spline smoothness must be >= 0");
  if (smoothness >= degree) throw std::invalid_argument("spline smoothness must be < degree");
}

std::vector<std::array<int, 3>> bernstein_exponents(int d) {
  std::vector<std::array<int, 3>> out;
  out.reserve(static_cast<std::size_t>(local_dim(d)));
  for (int i = d; i >= 0; --i) {
    for (int j = d - i; j >= 0; --j) out.push_back({i, j, d - i - j});
  }
  return out;
}

Eigen::MatrixXd eval_basis(const TriangulationMesh& mesh, const SplineBasisSpec& spec,
                           std::span<const Point2> points) {
  const int d = spec.degree, m = local_dim(d);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points.size()),
                                            static_cast<Eigen::Index>(mesh.num_triangles()) * m);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto tri = mesh.locate(points[i]);
    if (!tri) {
      throw GeometryError("eval_basis: point " + std::to_string(i) + " (" +
                          std::to_string(points[i].x()) + ", " + std::to_string(points[i].y()) +
                          ") is outside the triangulation");
    }
    B.block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(*tri) * m, 1, m) =
        bernstein_values(d, mesh.barycentric(*tri, points[i])).transpose();
  }
  return B;
}

Eigen::MatrixXd build_constraints(const TriangulationMesh& mesh, const SplineBasisSpec& spec) {
  const int d = spec.degree, r = spec.smoothness, m = local_dim(d);
  const auto fact = factorials(d);
  int per_edge = 0;
  for (int rho = 0; rho <= r; ++rho) per_edge += d - rho + 1;
  const auto& edges = mesh.shared_edges();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(edges.size()) * per_edge,
                                            static_cast<Eigen::Index>(mesh.num_triangles()) * m);
  Eigen::Index row = 0;
  for (const auto& e : edges) {
    const Triangle& t1 = mesh.triangles()[e.tri_a];
    const Triangle& t2 = mesh.triangles()[e.tri_b];
    const int lo1 = local_position(t1, e.v_lo), hi1 = local_position(t1, e.v_hi);
    const int lo2 = local_position(t2, e.v_lo), hi2 = local_position(t2, e.v_hi);
    const int off1 = 3 - lo1 - hi1, off2 = 3 - lo2 - hi2;
    // Off-edge vertex of the second triangle in the first triangle's coordinates.
    const Eigen::Vector3d lam = mesh.barycentric(e.tri_a, mesh.vertices()[t2.v[off2]]);
    const Eigen::Index base1 = static_cast<Eigen::Index>(e.tri_a) * m;
    const Eigen::Index base2 = static_cast<Eigen::Index>(e.tri_b) * m;
    for (int rho = 0; rho <= r; ++rho) {
      for (int j = d - rho; j >= 0; --j) {
        const int k = d - rho - j;
        std::array<int, 3> e2{};
        e2[off2] = rho;
        e2[lo2] = j;
        e2[hi2] = k;
        K(row, base2 + index_of(d, e2)) += 1.0;
        for (int na = rho; na >= 0; --na) {
          for (int nl = rho - na; nl >= 0; --nl) {
            const int nh = rho - na - nl;
            std::array<int, 3> e1{};
            e1[off1] = na;
            e1[lo1] = j + nl;
            e1[hi1] = k + nh;
            const double w = fact[rho] / (fact[na] * fact[nl] * fact[nh]) *
                             std::pow(lam[off1], na) * std::pow(lam[lo1], nl) *
                             std::pow(lam[hi1], nh);
            K(row, base1 + index_of(d, e1)) -= w;
          }
        }
        ++row;
      }
    }
  }
  return K;
}

Eigen::MatrixXd build_energy(const TriangulationMesh& mesh, const SplineBasisSpec& spec) {
  spec.validate();
  const int d = spec.degree, m = local_dim(d), q = d - 2, m2 = local_dim(q);
  const auto fact = factorials(2 * q + 2);
  const auto exps = bernstein_exponents(q);

  // Gram matrix of degree-q Bernstein polynomials on a triangle of unit area:
  // int b^(eta+mu) dA = 2 * Area * (eta+mu)! / (2q + 2)!.
  Eigen::MatrixXd gram_unit(m2, m2);
  for (int a = 0; a < m2; ++a) {
    for (int b = 0; b < m2; ++b) {
      const auto& e = exps[a];
      const auto& f = exps[b];
      double c = fact[q] * fact[q] / (fact[e[0]] * fact[e[1]] * fact[e[2]] * fact[f[0]] * fact[f[1]] * fact[f[2]]);
      c *= 2.0 * fact[e[0] + f[0]] * fact[e[1] + f[1]] * fact[e[2] + f[2]] / fact[2 * q + 2];
      gram_unit(a, b) = c;
    }
  }

  const Eigen::Index M = static_cast<Eigen::Index>(mesh.num_triangles()) * m;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(M, M);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const int ti = static_cast<int>(t);
    const double area =
        0.5 * std::abs(signed_area2(mesh.vertex(ti, 0), mesh.vertex(ti, 1), mesh.vertex(ti, 2)));
    const Eigen::Vector3d ax = direction_coords(mesh, ti, Eigen::Vector2d(1, 0));
    const Eigen::Vector3d ay = direction_coords(mesh, ti, Eigen::Vector2d(0, 1));
    const Eigen::MatrixXd Lxx = second_derivative_map(d, ax, ax);
    const Eigen::MatrixXd Lxy = second_derivative_map(d, ax, ay);
    const Eigen::MatrixXd Lyy = second_derivative_map(d, ay, ay);
    const Eigen::MatrixXd G = area * gram_unit;
    P.block(ti * m, ti * m, m, m) = Lxx.transpose() * G * Lxx + 2.0 * Lxy.transpose() * G * Lxy +
                                    Lyy.transpose() * G * Lyy;
  }
  // Symmetrize away rounding.
  return 0.5 * (P + P.transpose());
}

Reparameterization reparameterize(const Eigen::MatrixXd& B, const Eigen::MatrixXd& K,
                                  const Eigen::MatrixXd& P) {
  const Eigen::Index M = B.cols();
  if (K.rows() > 0 && K.cols() != M) throw std::invalid_argument("reparameterize: K has wrong width");
  if (P.rows() != M || P.cols() != M) throw std::invalid_argument("reparameterize: P has wrong size");
  Reparameterization out;
  if (K.rows() == 0) {
    out.Q2 = Eigen::MatrixXd::Identity(M, M);
    out.rank_K = 0;
  } else {
    const Eigen::MatrixXd gram = K.rows() <= K.cols() ? Eigen::MatrixXd(K * K.transpose())
                                                      : Eigen::MatrixXd(K.transpose() * K);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double sigma_max = std::sqrt(std::max(eig.eigenvalues().maxCoeff(), 0.0));
    const double tol = 1e-10 * sigma_max;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(K.transpose());
    const auto& R = qr.matrixQR();
    const Eigen::Index diag = std::min(R.rows(), R.cols());
    Eigen::Index rank = 0;
    bool ambiguous = false;
    for (Eigen::Index i = 0; i < diag; ++i) {
      const double v = std::abs(R(i, i));
      if (v > tol) {
        ++rank;
        if (v < 1e4 * tol) ambiguous = true;
      }
    }
    if (ambiguous) {
      std::cerr << "warning: smoothness constraint matrix is close to rank deficient; using rank "
                << rank << "\n";
    }
    const Eigen::MatrixXd Q = qr.householderQ();
    out.Q2 = Q.rightCols(M - rank);
    out.rank_K = rank;
  }
  out.Btilde = B * out.Q2;
  out.D = out.Q2.transpose() * P * out.Q2;
  out.D = 0.5 * (out.D + out.D.transpose()).eval();
  return out;
}

SplineSystem build_spline_system(std::shared_ptr<const TriangulationMesh> mesh,
                                 const SplineBasisSpec& spec, std::span<const Point2> points) {
  spec.validate();
  if (!spec.full_approximation_power()) {
    std::cerr << "warning: spline degree " << spec.degree << " < 3r+2 for smoothness "
              << spec.smoothness << "; approximation power is reduced\n";
  }
  SplineSystem sys;
  sys.mesh = mesh;
  sys.spec = spec;
  sys.B = eval_basis(*mesh, spec, points);
  sys.K = build_constraints(*mesh, spec);
  sys.P = build_energy(*mesh, spec);
  auto rp = reparameterize(sys.B, sys.K, sys.P);
  sys.Q2 = std::move(rp.Q2);
  sys.Btilde = std::move(rp.Btilde);
  sys.D = std::move(rp.D);
  sys.rank_K = rp.rank_K;
  return sys;
}

std::string spline_system_to_json_text(const SplineSystem& sys) {
  auto dense = [](const Eigen::MatrixXd& A) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < A.cols(); ++j) row.push_back(A(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  nlohmann::json doc;
  doc["degree"] = sys.spec.degree;
  doc["smoothness"] = sys.spec.smoothness;
  doc["num_triangles"] = sys.mesh ? sys.mesh->num_triangles() : 0;
  doc["num_points"] = sys.B.rows();
  doc["num_coefficients"] = sys.B.cols();
  doc["num_constraints"] = sys.K.rows();
  doc["rank_K"] = sys.rank_K;
  doc["reduced_dim"] = sys.Q2.cols();
  doc["basis_order"] = "triangles in mesh order; within a triangle (i,j,k), i+j+k=d, descending in i then j";
  if (sys.B.cols() <= 512) {
    doc["B"] = dense(sys.B);
    doc["K"] = dense(sys.K);
    doc["P"] = dense(sys.P);
    doc["Q2"] = dense(sys.Q2);
    doc["D"] = dense(sys.D);
  }
  return doc.dump();
}

SplineFunction::SplineFunction(std::shared_ptr<const TriangulationMesh> mesh, SplineBasisSpec spec,
                               Eigen::VectorXd alpha)
    : mesh_(std::move(mesh)), spec_(spec), alpha_(std::move(alpha)) {
  const Eigen::Index expected = static_cast<Eigen::Index>(mesh_->num_triangles()) * local_dim(spec_.degree);
  if (alpha_.size() != expected) {
    throw std::invalid_argument("SplineFunction: coefficient vector has length " +
                                std::to_string(alpha_.size()) + ", expected " + std::to_string(expected));
  }
}

double SplineFunction::value_on(int tri, const Point2& p) const {
  const int m = local_dim(spec_.degree);
  return bernstein_values(spec_.degree, mesh_->barycentric(tri, p)).dot(alpha_.segment(tri * m, m));
}

double SplineFunction::value(const Point2& p) const {
  const auto tri = mesh_->locate(p);
  if (!tri) throw GeometryError("eval_spline: point outside the triangulation");
  return value_on(*tri, p);
}

Eigen::Vector2d SplineFunction::gradient_on(int tri, const Point2& p) const {
  const int d = spec_.degree, m = local_dim(d);
  const Eigen::Vector3d b = mesh_->barycentric(tri, p);
  const Eigen::VectorXd lower = bernstein_values(d - 1, b);
  const auto coeffs = alpha_.segment(tri * m, m);
  Eigen::Vector2d grad;
  for (int axis = 0; axis < 2; ++axis) {
    const Eigen::Vector3d a =
        direction_coords(*mesh_, tri, axis == 0 ? Eigen::Vector2d(1, 0) : Eigen::Vector2d(0, 1));
    double g = 0.0;
    for (const auto& eta : bernstein_exponents(d - 1)) {
      double c = 0.0;
      for (int s = 0; s < 3; ++s) {
        auto e = eta;
        e[s] += 1;
        c += a[s] * coeffs[index_of(d, e)];
      }
      g += c * lower[index_of(d - 1, eta)];
    }
    grad[axis] = d * g;
  }
  return grad;
}

Eigen::VectorXd SplineFunction::values(std::span<const Point2> points) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) out[static_cast<Eigen::Index>(i)] = value(points[i]);
  return out;
}

}  // namespace shaplm
