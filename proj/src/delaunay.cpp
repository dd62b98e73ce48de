#include "shaplm/geometry.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace shaplm {

namespace {

struct WorkTri {
  std::array<int, 3> v;  // counter-clockwise
  Point2 center;
  double r2 = 0.0;
  bool alive = true;
};

WorkTri make_tri(const std::vector<Point2>& pts, int a, int b, int c) {
  if (signed_area2(pts[a], pts[b], pts[c]) < 0) std::swap(b, c);
  WorkTri t{{a, b, c}, Point2::Zero(), 0.0, true};
  const Point2& A = pts[a];
  const Point2 B = pts[b] - A;
  const Point2 C = pts[c] - A;
  const double d = 2.0 * (B.x() * C.y() - B.y() * C.x());
  if (d == 0.0) {
    // Collinear triple: an infinite circumcircle contains everything on one side.
    t.center = A;
    t.r2 = std::numeric_limits<double>::infinity();
    return t;
  }
  const double b2 = B.squaredNorm(), c2 = C.squaredNorm();
  const Point2 u((C.y() * b2 - B.y() * c2) / d, (B.x() * c2 - C.x() * b2) / d);
  t.center = A + u;
  t.r2 = u.squaredNorm();
  return t;
}

// Strictly inside, with a relative tolerance of 1e-10 on the squared radius.
bool in_circumcircle(const WorkTri& t, const Point2& p) {
  if (std::isinf(t.r2)) return true;
  return (p - t.center).squaredNorm() < t.r2 * (1.0 - 1e-10);
}

// Incircle determinant of d against ccw (a, b, c); positive when inside.
double incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double ad = adx * adx + ady * ady, bd = bdx * bdx + bdy * bdy, cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

}  // namespace

DelaunayResult delaunay(std::span<const Point2> points) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw GeometryError("delaunay: need at least 3 points");
  {
    std::vector<std::pair<double, double>> sorted;
    sorted.reserve(points.size());
    for (const auto& p : points) {
      if (!std::isfinite(p.x()) || !std::isfinite(p.y())) {
        throw GeometryError("delaunay: non-finite coordinate");
      }
      sorted.emplace_back(p.x(), p.y());
    }
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw GeometryError("delaunay: duplicate points");
    }
  }
  double xmin = points[0].x(), xmax = xmin, ymin = points[0].y(), ymax = ymin;
  for (const auto& p : points) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  const double extent = std::max(xmax - xmin, ymax - ymin);
  {
    // Collinearity: every point on the line through the first point and the farthest one.
    int far = 0;
    double best = -1;
    for (int i = 1; i < n; ++i) {
      const double d = (points[i] - points[0]).squaredNorm();
      if (d > best) best = d, far = i;
    }
    bool collinear = true;
    for (int i = 0; i < n && collinear; ++i) {
      if (std::abs(signed_area2(points[0], points[far], points[i])) > 1e-12 * extent * extent) {
        collinear = false;
      }
    }
    if (collinear) throw GeometryError("delaunay: all points are collinear");
  }

  std::vector<Point2> pts(points.begin(), points.end());
  const Point2 mid(0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
  const double big = 64.0 * extent;
  pts.emplace_back(mid.x() - big, mid.y() - big);
  pts.emplace_back(mid.x() + big, mid.y() - big);
  pts.emplace_back(mid.x(), mid.y() + big);

  std::vector<WorkTri> tris;
  tris.push_back(make_tri(pts, n, n + 1, n + 2));

  std::map<std::pair<int, int>, int> boundary;
  for (int i = 0; i < n; ++i) {
    const Point2& p = pts[i];
    boundary.clear();
    for (auto& t : tris) {
      if (!t.alive || !in_circumcircle(t, p)) continue;
      t.alive = false;
      for (int k = 0; k < 3; ++k) {
        const int a = t.v[k], b = t.v[(k + 1) % 3];
        // A directed edge whose reverse is also in the cavity is interior to it.
        auto rev = boundary.find({b, a});
        if (rev != boundary.end()) {
          boundary.erase(rev);
        } else {
          boundary[{a, b}] = 1;
        }
      }
    }
    std::erase_if(tris, [](const WorkTri& t) { return !t.alive; });
    for (const auto& [e, unused] : boundary) {
      (void)unused;
      tris.push_back(make_tri(pts, e.first, e.second, i));
    }
  }

  std::vector<std::array<int, 3>> kept;
  for (const auto& t : tris) {
    if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
    const double scale = extent * extent;
    if (std::abs(signed_area2(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]])) <= 1e-14 * scale) continue;
    kept.push_back(t.v);
  }

  // Cocircular ties: keep the lexicographically smaller diagonal. Flipping only
  // touches exact-tie quadrilaterals, so the loop is bounded; the cap is a guard.
  const double tie_tol = 1e-10 * std::pow(extent, 4);
  for (int sweep = 0; sweep < 64; ++sweep) {
    std::map<std::pair<int, int>, std::vector<int>> edge_tris;
    for (std::size_t t = 0; t < kept.size(); ++t) {
      for (int k = 0; k < 3; ++k) {
        const int a = kept[t][k], b = kept[t][(k + 1) % 3];
        edge_tris[{std::min(a, b), std::max(a, b)}].push_back(static_cast<int>(t));
      }
    }
    bool flipped = false;
    std::set<int> touched;
    for (const auto& [e, ts] : edge_tris) {
      if (ts.size() != 2 || touched.count(ts[0]) || touched.count(ts[1])) continue;
      auto opposite = [&](int t) {
        for (int v : kept[t]) {
          if (v != e.first && v != e.second) return v;
        }
        return -1;
      };
      const int c = opposite(ts[0]), d = opposite(ts[1]);
      const auto& T = kept[ts[0]];
      if (std::abs(incircle(pts[T[0]], pts[T[1]], pts[T[2]], pts[d])) > tie_tol) continue;
      const std::pair<int, int> other{std::min(c, d), std::max(c, d)};
      if (!(other < e)) continue;
      // The quadrilateral must be strictly convex for the flip to be valid.
      const double s1 = signed_area2(pts[c], pts[d], pts[e.first]);
      const double s2 = signed_area2(pts[c], pts[d], pts[e.second]);
      if (!(s1 * s2 < 0)) continue;
      kept[ts[0]] = {c, d, e.first};
      kept[ts[1]] = {d, c, e.second};
      for (int t : ts) {
        auto& tri = kept[t];
        if (signed_area2(pts[tri[0]], pts[tri[1]], pts[tri[2]]) < 0) std::swap(tri[1], tri[2]);
        touched.insert(t);
      }
      flipped = true;
    }
    if (!flipped) break;
  }

  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    auto sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    return sa < sb;
  });
  std::set<std::pair<int, int>> edge_set;
  std::vector<Triangle> out_tris;
  out_tris.reserve(kept.size());
  for (const auto& t : kept) {
    out_tris.push_back({t});
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      edge_set.insert({std::min(a, b), std::max(a, b)});
    }
  }
  DelaunayResult result;
  result.edges.assign(edge_set.begin(), edge_set.end());
  result.mesh = TriangulationMesh(std::vector<Point2>(points.begin(), points.end()), std::move(out_tris));
  return result;
}

}  // namespace shaplm
