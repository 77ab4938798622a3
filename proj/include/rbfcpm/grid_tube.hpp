#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <string_view>
#include <vector>

#include "rbfcpm/errors.hpp"
#include "rbfcpm/geometry.hpp"
#include "rbfcpm/parallel.hpp"
#include "rbfcpm/surfaces.hpp"

namespace rbfcpm {

/// Number of v in Z^dim with |v|^2 <= q (Gauss circle/sphere problem).
inline std::int64_t lattice_count(long q, int dim) {
  if (q < 0) return 0;
  const int r = static_cast<int>(std::floor(std::sqrt(static_cast<double>(q)))) + 1;
  const int rz = dim == 3 ? r : 0;
  std::int64_t n = 0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j)
      for (int k = -rz; k <= rz; ++k)
        if (static_cast<long>(i) * i + static_cast<long>(j) * j + static_cast<long>(k) * k <= q)
          ++n;
  return n;
}

/// Smallest q with lattice_count(q, dim) == m. Throws UnsupportedStencilSize
/// when no ball of integer squared radius holds exactly m lattice points.
inline long stencil_shell(int m, int dim) {
  if (dim != 2 && dim != 3) throw Error("dimension must be 2 or 3");
  if (m < 1) throw UnsupportedStencilSize("stencil size must be positive");
  long q = 0;
  std::int64_t prev = 0;
  for (;; ++q) {
    const std::int64_t c = lattice_count(q, dim);
    if (c == m) return q;
    if (c > m) {
      throw UnsupportedStencilSize(
          "stencil size " + std::to_string(m) + " is not a lattice ball count in " +
          std::to_string(dim) + "D; nearest valid sizes are " + std::to_string(prev) +
          " and " + std::to_string(c));
    }
    prev = c;
  }
}

/// Tube radius guaranteeing the m nearest lattice nodes of any surface point
/// lie inside the tube: (sqrt(q) + sqrt(dim)/2) dx.
inline double tube_radius_for_m(int m, int dim, double dx = 1.0) {
  const long q = stencil_shell(m, dim);
  return (std::sqrt(static_cast<double>(q)) + std::sqrt(static_cast<double>(dim)) / 2.0) * dx;
}

/// Tube radius of the classical finite-difference closest point method with
/// degree-p interpolation.
inline double classical_cpm_tube_radius(int p, int dim, double dx = 1.0) {
  if (p < 1) throw Error("interpolation degree must be >= 1");
  const double h = (p + 1) / 2.0;
  return std::sqrt((dim - 1) * h * h + (1.0 + h) * (1.0 + h)) * dx;
}

/// Lattice node i sits at origin + i * dx.
struct GridSpec {
  double dx = 0.1;
  int dim = 2;
  Box bounds;
  Point origin = Point::Zero();

  Point position(const LatticeIndex& i) const {
    return {origin[0] + i[0] * dx, origin[1] + i[1] * dx,
            dim == 3 ? origin[2] + i[2] * dx : 0.0};
  }
};

/// Node-centred lattices contain the coordinate origin; cell-centred ones put
/// every coordinate at (k + 1/2) dx.
enum class GridAlignment { node, cell };

inline std::string_view to_string(GridAlignment a) {
  return a == GridAlignment::node ? "node" : "cell";
}

inline Point lattice_origin(GridAlignment a, double dx, int dim) {
  if (a == GridAlignment::node) return Point::Zero();
  return {0.5 * dx, 0.5 * dx, dim == 3 ? 0.5 * dx : 0.0};
}

/// Lattice nodes within distance gamma of the surface, stored in
/// lexicographic index order.
class TubeGrid {
 public:
  TubeGrid() = default;
  TubeGrid(GridSpec spec, std::vector<LatticeIndex> nodes, double gamma)
      : spec_(spec), nodes_(std::move(nodes)), gamma_(gamma) {
    positions_.reserve(nodes_.size());
    lookup_.reserve(nodes_.size() * 2);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      positions_.push_back(spec_.position(nodes_[i]));
      if (!lookup_.emplace(nodes_[i], i).second)
        throw DuplicateNodes("duplicate lattice index in tube");
    }
  }

  const GridSpec& spec() const { return spec_; }
  double dx() const { return spec_.dx; }
  int dim() const { return spec_.dim; }
  double gamma() const { return gamma_; }
  std::size_t size() const { return nodes_.size(); }
  const LatticeIndex& index(std::size_t i) const { return nodes_[i]; }
  const Point& position(std::size_t i) const { return positions_[i]; }
  const Point& origin() const { return spec_.origin; }
  const std::vector<LatticeIndex>& indices() const { return nodes_; }

  std::optional<std::size_t> find(const LatticeIndex& i) const {
    auto it = lookup_.find(i);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

 private:
  GridSpec spec_;
  std::vector<LatticeIndex> nodes_;
  std::vector<Point> positions_;
  std::unordered_map<LatticeIndex, std::size_t, LatticeIndexHash> lookup_;
  double gamma_ = 0.0;
};

/// Ghost-node data for surfaces with boundary.
struct GhostInfo {
  std::vector<char> is_ghost;
  std::vector<Point> reflected;  ///< cp(2 cp(z) - z) per node
  double parity = -1.0;          ///< odd extension (homogeneous Dirichlet)

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(is_ghost.begin(), is_ghost.end(), 1));
  }
};

inline constexpr double ghost_tolerance = 1e-10;

struct ClosestPointMap {
  std::vector<Point> points;  ///< x_j = cp(z_j)
  std::vector<double> distance;
  std::vector<int> triangle;  ///< owning triangle for meshes, else -1
  GhostInfo ghosts;           ///< empty for closed surfaces
};

struct Tube {
  TubeGrid grid;
  ClosestPointMap cp;
};

namespace detail {
inline std::optional<ClosestPoint> closest_in_tube(const Surface& s, const Point& z,
                                                   double gamma) {
  if (const auto* mesh = dynamic_cast<const TriMeshSurface*>(&s)) {
    try {
      return mesh->closest_point_within(z, gamma);
    } catch (const OutsideTube&) {
      return std::nullopt;
    }
  }
  if (s.distance(z) > gamma) return std::nullopt;
  ClosestPoint c = s.closest_point(z);
  if (c.distance > gamma) return std::nullopt;
  return c;
}
}  // namespace detail

/// Keeps every lattice node with |z - cp(z)| <= gamma.
inline Tube build_tube(const Surface& surface, double dx, double gamma,
                       const Point& origin = Point::Zero()) {
  if (!(dx > 0.0)) throw Error("grid spacing must be positive");
  if (!(gamma > 0.0)) throw Error("tube radius must be positive");
  const int dim = surface.dim();
  std::vector<LatticeIndex> candidates = surface.candidate_nodes(dx, gamma, origin);
  GridSpec spec{dx, dim, surface.bounding_box().padded(gamma + 2.0 * dx, dim), origin};

  std::vector<std::optional<ClosestPoint>> found(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    found[i] = detail::closest_in_tube(surface, spec.position(candidates[i]), gamma);
  });

  std::vector<LatticeIndex> kept;
  ClosestPointMap cp;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!found[i]) continue;
    kept.push_back(candidates[i]);
    cp.points.push_back(found[i]->point);
    cp.distance.push_back(found[i]->distance);
    cp.triangle.push_back(found[i]->triangle);
  }
  if (kept.empty())
    throw EmptyTube("no lattice node within gamma=" + std::to_string(gamma) +
                    " of the surface at dx=" + std::to_string(dx));

  TubeGrid grid(spec, std::move(kept), gamma);
  if (surface.has_boundary()) {
    cp.ghosts.is_ghost.assign(grid.size(), 0);
    cp.ghosts.reflected.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Point z = grid.position(i);
      const Point r = surface.closest_point(2.0 * cp.points[i] - z).point;
      cp.ghosts.reflected[i] = r;
      cp.ghosts.is_ghost[i] = (r - cp.points[i]).norm() > ghost_tolerance ? 1 : 0;
    }
  }
  return {std::move(grid), std::move(cp)};
}

/// m nearest tube nodes of a point; ordinals ascending.
struct Stencil {
  std::vector<std::size_t> nodes;
  std::size_t anchor = 0;     ///< node nearest the point
  double max_distance = 0.0;  ///< distance of the m-th nearest node
};

namespace detail {
struct Candidate {
  double d2;
  LatticeIndex index;
  std::size_t ordinal;
};

// Orders by distance; distances within 1e-12 dx of each other count as a tie
// and fall back to lexicographic lattice index.
inline void order_candidates(std::vector<Candidate>& c, double dx) {
  std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    return a.index < b.index;
  });
  const double tol = 1e-12 * dx;
  std::size_t i = 0;
  while (i < c.size()) {
    std::size_t j = i + 1;
    while (j < c.size() && std::sqrt(c[j].d2) - std::sqrt(c[j - 1].d2) < tol) ++j;
    if (j - i > 1)
      std::sort(c.begin() + i, c.begin() + j,
                [](const Candidate& a, const Candidate& b) { return a.index < b.index; });
    i = j;
  }
}

inline Stencil take_stencil(std::vector<Candidate>& c, int m) {
  Stencil s;
  s.anchor = c.front().ordinal;
  s.max_distance = std::sqrt(c[m - 1].d2);
  s.nodes.reserve(m);
  for (int k = 0; k < m; ++k) s.nodes.push_back(c[k].ordinal);
  std::sort(s.nodes.begin(), s.nodes.end());
  return s;
}
}  // namespace detail

/// Exhaustive O(n_Z) nearest-m search.
inline Stencil nearest_m_exhaustive(const TubeGrid& tube, const Point& x, int m) {
  if (m < 1 || static_cast<std::size_t>(m) > tube.size())
    throw InsufficientNodes("tube has " + std::to_string(tube.size()) +
                            " nodes, stencil needs " + std::to_string(m));
  std::vector<detail::Candidate> c;
  c.reserve(tube.size());
  for (std::size_t i = 0; i < tube.size(); ++i)
    c.push_back({(tube.position(i) - x).squaredNorm(), tube.index(i), i});
  detail::order_candidates(c, tube.dx());
  return detail::take_stencil(c, m);
}

/// Hash-lookup neighbour search over a ball of lattice offsets around the
/// node nearest the query. Falls back to the exhaustive scan when the ball
/// cannot certify the answer.
class NeighborSearch {
 public:
  NeighborSearch(const TubeGrid& tube, int m) : tube_(tube), m_(m) {
    if (m < 1 || static_cast<std::size_t>(m) > tube.size())
      throw InsufficientNodes("tube has " + std::to_string(tube.size()) +
                              " nodes, stencil needs " + std::to_string(m));
    const int dim = tube.dim();
    radius_ = tube.gamma();
    const double reach = radius_ / tube.dx() + std::sqrt(static_cast<double>(dim)) / 2.0 + 1e-9;
    const int r = static_cast<int>(std::ceil(reach));
    const int rz = dim == 3 ? r : 0;
    for (int i = -r; i <= r; ++i)
      for (int j = -r; j <= r; ++j)
        for (int k = -rz; k <= rz; ++k)
          if (std::sqrt(static_cast<double>(i * i + j * j + k * k)) <= reach)
            offsets_.push_back({i, j, k});
  }

  Stencil operator()(const Point& x) const {
    const double dx = tube_.dx();
    LatticeIndex base{0, 0, 0};
    for (int k = 0; k < tube_.dim(); ++k)
      base[k] = static_cast<int>(std::lround((x[k] - tube_.origin()[k]) / dx));
    std::vector<detail::Candidate> c;
    c.reserve(offsets_.size());
    for (const auto& o : offsets_) {
      const LatticeIndex idx = base + o;
      if (auto ord = tube_.find(idx))
        c.push_back({(tube_.position(*ord) - x).squaredNorm(), idx, *ord});
    }
    // Every node outside the ball is farther than radius_ from x.
    if (c.size() >= static_cast<std::size_t>(m_)) {
      detail::order_candidates(c, dx);
      if (std::sqrt(c[m_ - 1].d2) <= radius_) return detail::take_stencil(c, m_);
    }
    return nearest_m_exhaustive(tube_, x, m_);
  }

 private:
  const TubeGrid& tube_;
  int m_;
  double radius_ = 0.0;
  std::vector<LatticeIndex> offsets_;
};

inline Stencil nearest_m(const TubeGrid& tube, const Point& x, int m) {
  return NeighborSearch(tube, m)(x);
}

/// One stencil per query point.
inline std::vector<Stencil> build_stencils(const TubeGrid& tube,
                                           std::span<const Point> points, int m) {
  NeighborSearch search(tube, m);
  std::vector<Stencil> out(points.size());
  parallel_for(points.size(), [&](std::size_t i) { out[i] = search(points[i]); });
  return out;
}

/// Count of lattice nodes within radius of the surface (no closest points kept).
inline std::size_t count_tube_nodes(const Surface& surface, double dx, double radius,
                                    const Point& origin = Point::Zero()) {
  const GridSpec spec{dx, surface.dim(), {}, origin};
  std::size_t n = 0;
  for (const auto& idx : surface.candidate_nodes(dx, radius, origin))
    if (detail::closest_in_tube(surface, spec.position(idx), radius)) ++n;
  return n;
}

}  // namespace rbfcpm
