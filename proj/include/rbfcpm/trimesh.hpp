#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "rbfcpm/errors.hpp"
#include "rbfcpm/geometry.hpp"

namespace rbfcpm {

using Triangle = std::array<int, 3>;

/// Closest point on the triangle (a, b, c) to p. Handles the face, edge and
/// vertex Voronoi regions separately.
inline Point closest_point_on_triangle(const Point& p, const Point& a,
                                       const Point& b, const Point& c) {
  const Point ab = b - a;
  const Point ac = c - a;
  const Point ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Point bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return a + v * ab;
  }

  const Point cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return a + w * ac;
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + w * (c - b);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return a + ab * v + ac * w;
}

/// Immutable triangle soup with per-triangle bounding boxes and a uniform
/// bucket grid for range queries.
class TriMesh {
 public:
  TriMesh() = default;

  /// Drops triangles with out-of-range indices (throws) and zero-area faces
  /// (area < 1e-14 * bbox_diagonal^2); the number dropped is kept.
  TriMesh(std::vector<Point> vertices, std::vector<Triangle> triangles)
      : vertices_(std::move(vertices)) {
    if (vertices_.empty() || triangles.empty())
      throw EmptyMesh("mesh has no vertices or no triangles");
    bbox_.lo = bbox_.hi = vertices_.front();
    for (const auto& v : vertices_) {
      bbox_.lo = bbox_.lo.cwiseMin(v);
      bbox_.hi = bbox_.hi.cwiseMax(v);
    }
    const double diag2 = (bbox_.hi - bbox_.lo).squaredNorm();
    const int nv = static_cast<int>(vertices_.size());
    for (const auto& t : triangles) {
      for (int k : t)
        if (k < 0 || k >= nv)
          throw Error("triangle vertex index out of range");
      const Point& a = vertices_[t[0]];
      const double area =
          0.5 * (vertices_[t[1]] - a).cross(vertices_[t[2]] - a).norm();
      if (area < 1e-14 * diag2) {
        ++dropped_;
        continue;
      }
      triangles_.push_back(t);
    }
    if (triangles_.empty()) throw EmptyMesh("mesh has only degenerate faces");
    tri_boxes_.reserve(triangles_.size());
    double mean_extent = 0.0;
    for (const auto& t : triangles_) {
      Box b;
      b.lo = vertices_[t[0]].cwiseMin(vertices_[t[1]]).cwiseMin(vertices_[t[2]]);
      b.hi = vertices_[t[0]].cwiseMax(vertices_[t[1]]).cwiseMax(vertices_[t[2]]);
      mean_extent += (b.hi - b.lo).maxCoeff();
      tri_boxes_.push_back(b);
    }
    mean_extent /= static_cast<double>(triangles_.size());
    build_buckets(std::max(mean_extent, 1e-12));
  }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Box& triangle_box(std::size_t t) const { return tri_boxes_[t]; }
  const Box& bounding_box() const { return bbox_; }
  std::size_t dropped_degenerate() const { return dropped_; }

  Point closest_on(std::size_t t, const Point& p) const {
    const auto& tri = triangles_[t];
    return closest_point_on_triangle(p, vertices_[tri[0]], vertices_[tri[1]],
                                     vertices_[tri[2]]);
  }

  /// Triangles whose bounding box lies within `radius` of p (sorted, unique).
  std::vector<std::size_t> triangles_near(const Point& p, double radius) const {
    std::vector<std::size_t> out;
    std::array<long, 3> lo{}, hi{};
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::max(0L, cell_of(p[k] - radius, k));
      hi[k] = std::min(cells_[k] - 1, cell_of(p[k] + radius, k));
      if (lo[k] > hi[k]) return out;
    }
    for (long i = lo[0]; i <= hi[0]; ++i)
      for (long j = lo[1]; j <= hi[1]; ++j)
        for (long k = lo[2]; k <= hi[2]; ++k)
          for (std::size_t t : buckets_[flat(i, j, k)])
            if (box_distance2(tri_boxes_[t], p) <= radius * radius)
              out.push_back(t);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  static double box_distance2(const Box& b, const Point& p) {
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double e = std::max({b.lo[k] - p[k], 0.0, p[k] - b.hi[k]});
      d2 += e * e;
    }
    return d2;
  }

  long cell_of(double x, int axis) const {
    return static_cast<long>(std::floor((x - bbox_.lo[axis]) / cell_));
  }

  std::size_t flat(long i, long j, long k) const {
    return static_cast<std::size_t>((i * cells_[1] + j) * cells_[2] + k);
  }

  void build_buckets(double cell) {
    cell_ = cell;
    for (int k = 0; k < 3; ++k)
      cells_[k] = std::max(
          1L, static_cast<long>(std::floor((bbox_.hi[k] - bbox_.lo[k]) / cell_)) + 1);
    buckets_.assign(static_cast<std::size_t>(cells_[0] * cells_[1] * cells_[2]), {});
    for (std::size_t t = 0; t < tri_boxes_.size(); ++t) {
      const Box& b = tri_boxes_[t];
      for (long i = cell_of(b.lo[0], 0); i <= std::min(cells_[0] - 1, cell_of(b.hi[0], 0)); ++i)
        for (long j = cell_of(b.lo[1], 1); j <= std::min(cells_[1] - 1, cell_of(b.hi[1], 1)); ++j)
          for (long k = cell_of(b.lo[2], 2); k <= std::min(cells_[2] - 1, cell_of(b.hi[2], 2)); ++k)
            buckets_[flat(i, j, k)].push_back(t);
    }
  }

  std::vector<Point> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Box> tri_boxes_;
  Box bbox_;
  std::size_t dropped_ = 0;
  double cell_ = 1.0;
  std::array<long, 3> cells_{1, 1, 1};
  std::vector<std::vector<std::size_t>> buckets_;
};

/// Subdivided icosahedron projected onto the sphere of the given radius.
/// Level 3 gives 642 vertices and 1280 triangles.
inline TriMesh make_icosphere(int subdivisions, double radius = 1.0) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Point> v = {{-1, t, 0},  {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                          {0, -1, t},  {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                          {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10},
                             {0, 10, 11}, {1, 5, 9},  {5, 11, 4},  {11, 10, 2},
                             {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
                             {3, 2, 6},   {3, 6, 8},  {3, 8, 9},   {4, 9, 5},
                             {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& p : v) p.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int a = mid(tri[0], tri[1]);
      const int b = mid(tri[1], tri[2]);
      const int c = mid(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  for (auto& p : v) p *= radius;
  return TriMesh(std::move(v), std::move(f));
}

}  // namespace rbfcpm
