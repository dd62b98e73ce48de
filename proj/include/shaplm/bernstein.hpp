#pragma once

#include "shaplm/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace shaplm {

/// Degree and smoothness of the spline space S_d^r over a triangulation.
struct SplineBasisSpec {
  int degree = 5;
  int smoothness = 1;

  /// Throws for degree < 2 or negative smoothness.
  void validate() const;
  /// d >= 3r + 2, the condition for full approximation power.
  bool full_approximation_power() const { return degree >= 3 * smoothness + 2; }
};

/// Number of Bernstein polynomials of degree d on one triangle.
constexpr int local_dim(int d) { return (d + 1) * (d + 2) / 2; }

/// Position of exponent triple (i, j, k), i + j + k = d, in the per-triangle
/// ordering: lexicographic descending in i, then in j.
constexpr int local_index(int d, int i, int j) { return (d - i) * (d - i + 1) / 2 + (d - i - j); }

/// Exponent triples in local order.
std::vector<std::array<int, 3>> bernstein_exponents(int d);

/// Bernstein values B_ijk = d!/(i!j!k!) b1^i b2^j b3^k in local order.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bernstein_values(int d, const BarycentricT<Scalar>& b) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(local_dim(d));
  // Powers tables keep this O(d^2) and free of pow().
  std::vector<Scalar> p1(d + 1), p2(d + 1), p3(d + 1);
  p1[0] = p2[0] = p3[0] = Scalar(1);
  for (int e = 1; e <= d; ++e) {
    p1[e] = p1[e - 1] * b[0];
    p2[e] = p2[e - 1] * b[1];
    p3[e] = p3[e - 1] * b[2];
  }
  std::vector<double> fact(d + 1, 1.0);
  for (int e = 1; e <= d; ++e) fact[e] = fact[e - 1] * e;
  for (int i = d; i >= 0; --i) {
    for (int j = d - i; j >= 0; --j) {
      const int k = d - i - j;
      out[local_index(d, i, j)] = Scalar(fact[d] / (fact[i] * fact[j] * fact[k])) * p1[i] * p2[j] * p3[k];
    }
  }
  return out;
}

/// Basis matrix B (n x M): row i holds the local Bernstein values of point i on
/// its containing triangle and zeros elsewhere. Throws for points outside the mesh.
Eigen::MatrixXd eval_basis(const TriangulationMesh& mesh, const SplineBasisSpec& spec,
                           std::span<const Point2> points);

/// Linear smoothness conditions K alpha = 0 across every shared edge.
Eigen::MatrixXd build_constraints(const TriangulationMesh& mesh, const SplineBasisSpec& spec);

/// Thin-plate energy matrix P with alpha' P alpha = sum over triangles of
/// the integral of g_xx^2 + 2 g_xy^2 + g_yy^2.
Eigen::MatrixXd build_energy(const TriangulationMesh& mesh, const SplineBasisSpec& spec);

struct Reparameterization {
  Eigen::MatrixXd Btilde;  // B * Q2
  Eigen::MatrixXd D;       // Q2' P Q2
  Eigen::MatrixXd Q2;      // orthonormal basis of null(K)
  Eigen::Index rank_K = 0;
};

/// QR of K' with column pivoting; rank tolerance is 1e-10 times the largest
/// singular value of K.
Reparameterization reparameterize(const Eigen::MatrixXd& B, const Eigen::MatrixXd& K,
                                  const Eigen::MatrixXd& P);

/// All BPST matrices for one mesh, spec and set of observation points.
struct SplineSystem {
  std::shared_ptr<const TriangulationMesh> mesh;
  SplineBasisSpec spec;
  Eigen::MatrixXd B;
  Eigen::MatrixXd K;
  Eigen::MatrixXd P;
  Eigen::MatrixXd Q2;
  Eigen::MatrixXd Btilde;
  Eigen::MatrixXd D;
  Eigen::Index rank_K = 0;

  Eigen::Index num_coefficients() const { return B.cols(); }
  Eigen::Index reduced_dim() const { return Q2.cols(); }
};

SplineSystem build_spline_system(std::shared_ptr<const TriangulationMesh> mesh,
                                 const SplineBasisSpec& spec, std::span<const Point2> points);

/// Debug dump: dimensions, rank(K), and the dense matrices when M <= 512.
std::string spline_system_to_json_text(const SplineSystem& sys);

/// g(s) = B(s)' alpha over a mesh.
class SplineFunction {
 public:
  SplineFunction(std::shared_ptr<const TriangulationMesh> mesh, SplineBasisSpec spec,
                 Eigen::VectorXd alpha);

  const TriangulationMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const TriangulationMesh> mesh_ptr() const { return mesh_; }
  const SplineBasisSpec& spec() const { return spec_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }

  double value(const Point2& p) const;
  /// Value of the polynomial piece of triangle `tri`, also valid outside it.
  double value_on(int tri, const Point2& p) const;
  /// Gradient (d/dx, d/dy) of the polynomial piece of triangle `tri`.
  Eigen::Vector2d gradient_on(int tri, const Point2& p) const;

  Eigen::VectorXd values(std::span<const Point2> points) const;

 private:
  std::shared_ptr<const TriangulationMesh> mesh_;
  SplineBasisSpec spec_;
  Eigen::VectorXd alpha_;
};

inline Eigen::VectorXd eval_spline(const SplineFunction& fn, std::span<const Point2> points) {
  return fn.values(points);
}

}  // namespace shaplm
