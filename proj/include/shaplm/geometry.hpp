#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace shaplm {

template <typename Scalar>
using Point2T = Eigen::Matrix<Scalar, 2, 1>;
using Point2 = Point2T<double>;

template <typename Scalar>
using BarycentricT = Eigen::Matrix<Scalar, 3, 1>;
using Barycentric = BarycentricT<double>;

/// Vertex indices of one triangle. Orientation is whatever the caller supplied;
/// the local Bernstein ordering follows (v[0], v[1], v[2]).
struct Triangle {
  std::array<int, 3> v{};
};

/// Edge shared by exactly two triangles, recorded by vertex index (lo < hi).
struct SharedEdge {
  int tri_a = -1;
  int tri_b = -1;
  int v_lo = -1;
  int v_hi = -1;
};

struct Rect {
  double xmin = 0.0, ymin = 0.0, xmax = 1.0, ymax = 1.0;
};

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Twice the signed area of (a, b, c).
template <typename Scalar>
Scalar signed_area2(const Point2T<Scalar>& a, const Point2T<Scalar>& b, const Point2T<Scalar>& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

/// Barycentric coordinates of p relative to (a, b, c). Coordinates may be
/// negative when p lies outside the triangle.
template <typename Scalar>
BarycentricT<Scalar> barycentric(const Point2T<Scalar>& a, const Point2T<Scalar>& b,
                                 const Point2T<Scalar>& c, const Point2T<Scalar>& p) {
  using std::abs;
  const Scalar det = signed_area2(a, b, c);
  const Scalar scale = (b - a).squaredNorm() + (c - a).squaredNorm() + (c - b).squaredNorm();
  if (!(abs(det) > Scalar(1e-14) * scale)) {
    throw GeometryError("barycentric: degenerate (zero-area) triangle");
  }
  BarycentricT<Scalar> out;
  out[1] = signed_area2(a, p, c) / det;
  out[2] = signed_area2(a, b, p) / det;
  out[0] = Scalar(1) - out[1] - out[2];
  return out;
}

class TriangulationMesh {
 public:
  TriangulationMesh() = default;

  /// Validates indices and areas, then derives shared-edge adjacency, the mesh
  /// size and the point-location index. Vertices are matched by index only.
  TriangulationMesh(std::vector<Point2> vertices, std::vector<Triangle> triangles);

  const std::vector<Point2>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<SharedEdge>& shared_edges() const { return shared_edges_; }
  std::size_t num_triangles() const { return triangles_.size(); }
  std::size_t num_vertices() const { return vertices_.size(); }

  /// Longest edge length over all triangles.
  double mesh_size() const { return mesh_size_; }

  const Point2& vertex(int tri, int local) const { return vertices_[triangles_[tri].v[local]]; }

  Barycentric barycentric(int tri, const Point2& p) const;

  /// Lowest-index triangle whose barycentric coordinates of p are all >= -1e-10.
  std::optional<int> locate(const Point2& p) const;

 private:
  void build_locator();
  bool contains(int tri, const Point2& p) const;

  std::vector<Point2> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<SharedEdge> shared_edges_;
  double mesh_size_ = 0.0;

  // Uniform bucket grid, used above kBruteForceLimit triangles.
  static constexpr std::size_t kBruteForceLimit = 256;
  Rect bbox_{};
  int grid_nx_ = 0, grid_ny_ = 0;
  std::vector<std::vector<int>> buckets_;
};

inline std::optional<int> locate_point(const TriangulationMesh& mesh, const Point2& p) {
  return mesh.locate(p);
}

/// Rectangle split into resolution x resolution squares, each cut into two
/// triangles along the lower-left to upper-right diagonal.
TriangulationMesh mesh_uniform_rect(const Rect& domain, int resolution);

/// Reads `{"vertices": [[x,y],...], "triangles": [[i,j,k],...]}`.
TriangulationMesh mesh_from_file(const std::string& path);
TriangulationMesh mesh_from_json_text(const std::string& text);
std::string mesh_to_json_text(const TriangulationMesh& mesh);

/// Reads a CSV with header `x,y` (extra columns ignored).
std::vector<Point2> read_locations_csv(const std::string& path);

struct DelaunayResult {
  std::vector<std::pair<int, int>> edges;  // (lo, hi), sorted
  TriangulationMesh mesh;
};

/// Bowyer-Watson Delaunay triangulation. Cocircular quadrilaterals are
/// resolved towards the lexicographically smaller diagonal.
DelaunayResult delaunay(std::span<const Point2> points);

}  // namespace shaplm
