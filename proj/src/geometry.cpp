#include "shaplm/geometry.hpp"

#include "shaplm/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>

namespace shaplm {

namespace {

constexpr double kInsideTol = -1e-10;

}  // namespace

TriangulationMesh::TriangulationMesh(std::vector<Point2> vertices, std::vector<Triangle> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  const int nv = static_cast<int>(vertices_.size());
  for (const auto& p : vertices_) {
    if (!std::isfinite(p.x()) || !std::isfinite(p.y())) {
      throw GeometryError("mesh: non-finite vertex coordinate");
    }
  }
  std::map<std::pair<int, int>, std::vector<int>> edge_tris;
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& v = triangles_[t].v;
    for (int k = 0; k < 3; ++k) {
      if (v[k] < 0 || v[k] >= nv) {
        throw GeometryError("mesh: triangle " + std::to_string(t) + " references vertex " +
                            std::to_string(v[k]) + " out of range [0, " + std::to_string(nv) +
                            ")");
      }
    }
    if (v[0] == v[1] || v[1] == v[2] || v[0] == v[2]) {
      throw GeometryError("mesh: triangle " + std::to_string(t) + " has repeated vertices");
    }
    const Point2& a = vertices_[v[0]];
    const Point2& b = vertices_[v[1]];
    const Point2& c = vertices_[v[2]];
    const double scale = (b - a).squaredNorm() + (c - a).squaredNorm() + (c - b).squaredNorm();
    if (!(std::abs(signed_area2(a, b, c)) > 1e-14 * scale)) {
      throw GeometryError("mesh: triangle " + std::to_string(t) + " has zero area");
    }
    for (int k = 0; k < 3; ++k) {
      const int i = v[k], j = v[(k + 1) % 3];
      mesh_size_ = std::max(mesh_size_, (vertices_[i] - vertices_[j]).norm());
      edge_tris[{std::min(i, j), std::max(i, j)}].push_back(static_cast<int>(t));
    }
  }
  for (const auto& [edge, tris] : edge_tris) {
    if (tris.size() > 2) {
      throw GeometryError("mesh: edge (" + std::to_string(edge.first) + "," +
                          std::to_string(edge.second) + ") is shared by more than two triangles");
    }
    if (tris.size() == 2) shared_edges_.push_back({tris[0], tris[1], edge.first, edge.second});
  }
  build_locator();
}

Barycentric TriangulationMesh::barycentric(int tri, const Point2& p) const {
  return shaplm::barycentric(vertex(tri, 0), vertex(tri, 1), vertex(tri, 2), p);
}

bool TriangulationMesh::contains(int tri, const Point2& p) const {
  return barycentric(tri, p).minCoeff() >= kInsideTol;
}

void TriangulationMesh::build_locator() {
  if (vertices_.empty()) return;
  bbox_ = {vertices_[0].x(), vertices_[0].y(), vertices_[0].x(), vertices_[0].y()};
  for (const auto& p : vertices_) {
    bbox_.xmin = std::min(bbox_.xmin, p.x());
    bbox_.xmax = std::max(bbox_.xmax, p.x());
    bbox_.ymin = std::min(bbox_.ymin, p.y());
    bbox_.ymax = std::max(bbox_.ymax, p.y());
  }
  if (triangles_.size() <= kBruteForceLimit) return;

  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(triangles_.size()))));
  grid_nx_ = grid_ny_ = side;
  buckets_.assign(static_cast<std::size_t>(grid_nx_ * grid_ny_), {});
  const double w = std::max(bbox_.xmax - bbox_.xmin, 1e-300);
  const double h = std::max(bbox_.ymax - bbox_.ymin, 1e-300);
  auto cell = [&](double v, double lo, double span, int count) {
    const int c = static_cast<int>(std::floor((v - lo) / span * count));
    return std::clamp(c, 0, count - 1);
  };
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (int k = 0; k < 3; ++k) {
      const Point2& p = vertex(static_cast<int>(t), k);
      x0 = std::min(x0, p.x());
      x1 = std::max(x1, p.x());
      y0 = std::min(y0, p.y());
      y1 = std::max(y1, p.y());
    }
    // Pad by a relative sliver so points on cell borders reach every candidate.
    const double px = 1e-9 * w, py = 1e-9 * h;
    const int cx0 = cell(x0 - px, bbox_.xmin, w, grid_nx_), cx1 = cell(x1 + px, bbox_.xmin, w, grid_nx_);
    const int cy0 = cell(y0 - py, bbox_.ymin, h, grid_ny_), cy1 = cell(y1 + py, bbox_.ymin, h, grid_ny_);
    for (int cy = cy0; cy <= cy1; ++cy) {
      for (int cx = cx0; cx <= cx1; ++cx) {
        buckets_[static_cast<std::size_t>(cy * grid_nx_ + cx)].push_back(static_cast<int>(t));
      }
    }
  }
}

std::optional<int> TriangulationMesh::locate(const Point2& p) const {
  if (buckets_.empty()) {
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      if (contains(static_cast<int>(t), p)) return static_cast<int>(t);
    }
    return std::nullopt;
  }
  const double w = std::max(bbox_.xmax - bbox_.xmin, 1e-300);
  const double h = std::max(bbox_.ymax - bbox_.ymin, 1e-300);
  const double fx = (p.x() - bbox_.xmin) / w, fy = (p.y() - bbox_.ymin) / h;
  if (fx < -1e-9 || fx > 1 + 1e-9 || fy < -1e-9 || fy > 1 + 1e-9) return std::nullopt;
  const int cx = std::clamp(static_cast<int>(std::floor(fx * grid_nx_)), 0, grid_nx_ - 1);
  const int cy = std::clamp(static_cast<int>(std::floor(fy * grid_ny_)), 0, grid_ny_ - 1);
  // Buckets list triangles in ascending index order, so the first hit is the lowest index.
  for (int t : buckets_[static_cast<std::size_t>(cy * grid_nx_ + cx)]) {
    if (contains(t, p)) return t;
  }
  return std::nullopt;
}

TriangulationMesh mesh_uniform_rect(const Rect& domain, int resolution) {
  if (resolution < 1) throw GeometryError("mesh_uniform_rect: resolution must be >= 1");
  if (!(domain.xmax > domain.xmin) || !(domain.ymax > domain.ymin)) {
    throw GeometryError("mesh_uniform_rect: empty domain rectangle");
  }
  const int m = resolution;
  std::vector<Point2> verts;
  verts.reserve(static_cast<std::size_t>((m + 1) * (m + 1)));
  for (int j = 0; j <= m; ++j) {
    for (int i = 0; i <= m; ++i) {
      verts.emplace_back(domain.xmin + (domain.xmax - domain.xmin) * i / m,
                         domain.ymin + (domain.ymax - domain.ymin) * j / m);
    }
  }
  auto id = [m](int i, int j) { return j * (m + 1) + i; };
  std::vector<Triangle> tris;
  tris.reserve(static_cast<std::size_t>(2 * m * m));
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      tris.push_back({{id(i, j), id(i + 1, j), id(i + 1, j + 1)}});
      tris.push_back({{id(i, j), id(i + 1, j + 1), id(i, j + 1)}});
    }
  }
  return TriangulationMesh(std::move(verts), std::move(tris));
}

TriangulationMesh mesh_from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("mesh file: ") + e.what());
  }
  if (!doc.contains("vertices") || !doc.contains("triangles")) {
    throw ParseError("mesh file: expected keys 'vertices' and 'triangles'");
  }
  std::vector<Point2> verts;
  std::vector<Triangle> tris;
  try {
    for (const auto& v : doc.at("vertices")) {
      if (!v.is_array() || v.size() != 2) throw ParseError("mesh file: vertex must be [x, y]");
      verts.emplace_back(v[0].get<double>(), v[1].get<double>());
    }
    for (const auto& t : doc.at("triangles")) {
      if (!t.is_array() || t.size() != 3) throw ParseError("mesh file: triangle must be [i, j, k]");
      tris.push_back({{t[0].get<int>(), t[1].get<int>(), t[2].get<int>()}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("mesh file: ") + e.what());
  }
  return TriangulationMesh(std::move(verts), std::move(tris));
}

TriangulationMesh mesh_from_file(const std::string& path) {
  return mesh_from_json_text(read_text_file(path));
}

std::string mesh_to_json_text(const TriangulationMesh& mesh) {
  nlohmann::json doc;
  doc["vertices"] = nlohmann::json::array();
  for (const auto& p : mesh.vertices()) doc["vertices"].push_back({p.x(), p.y()});
  doc["triangles"] = nlohmann::json::array();
  for (const auto& t : mesh.triangles()) doc["triangles"].push_back({t.v[0], t.v[1], t.v[2]});
  return doc.dump();
}

std::vector<Point2> read_locations_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int cx = table.require("x", path), cy = table.require("y", path);
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(table.values.rows()));
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    out.emplace_back(table.values(i, cx), table.values(i, cy));
  }
  return out;
}

}  // namespace shaplm
