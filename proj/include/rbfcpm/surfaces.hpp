#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rbfcpm/errors.hpp"
#include "rbfcpm/geometry.hpp"
#include "rbfcpm/trimesh.hpp"

namespace rbfcpm {

enum class SurfaceKind { circle, semicircle, ellipse, sphere, torus, trimesh };

inline std::string_view to_string(SurfaceKind k) {
  switch (k) {
    case SurfaceKind::circle: return "circle";
    case SurfaceKind::semicircle: return "semicircle";
    case SurfaceKind::ellipse: return "ellipse";
    case SurfaceKind::sphere: return "sphere";
    case SurfaceKind::torus: return "torus";
    case SurfaceKind::trimesh: return "trimesh";
  }
  return "?";
}

struct ClosestPoint {
  Point point = Point::Zero();
  double distance = 0.0;
  /// Owning triangle for mesh surfaces, -1 otherwise.
  int triangle = -1;
};

/// Closest-point representation of a curve or surface.
class Surface {
 public:
  virtual ~Surface() = default;

  virtual SurfaceKind kind() const = 0;
  virtual int dim() const = 0;
  virtual Box bounding_box() const = 0;

  /// cp(z). Throws SingularPoint where the minimizer is not unique by
  /// construction (centre of a circle, axis of a torus, ...).
  virtual ClosestPoint closest_point(const Point& z) const = 0;

  /// Distance to the surface, defined everywhere (no SingularPoint).
  virtual double distance(const Point& z) const {
    return closest_point(z).distance;
  }

  /// Deviation of x from the implicit equation of the surface.
  virtual double implicit_residual(const Point& x) const = 0;

  virtual bool has_boundary() const { return false; }

  /// Modified map cp(2 cp(z) - z); equals cp(z) when z maps to the interior.
  Point reflected_closest_point(const Point& z) const {
    const Point c = closest_point(z).point;
    return closest_point(2.0 * c - z).point;
  }

  /// Lattice nodes worth testing for membership in a tube of radius gamma.
  virtual std::vector<LatticeIndex> candidate_nodes(double dx, double gamma,
                                                    const Point& origin = Point::Zero()) const {
    const Box box = bounding_box().padded(gamma + 2.0 * dx, dim());
    std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int k = 0; k < dim(); ++k) {
      lo[k] = static_cast<int>(std::floor((box.lo[k] - origin[k]) / dx));
      hi[k] = static_cast<int>(std::ceil((box.hi[k] - origin[k]) / dx));
    }
    std::vector<LatticeIndex> out;
    for (int i = lo[0]; i <= hi[0]; ++i)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int k = lo[2]; k <= hi[2]; ++k) out.push_back({i, j, k});
    return out;
  }
};

namespace detail {
inline void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw Error(std::string(what) + " must be positive");
}
inline void check_on_surface(const Surface& s, const Point& x) {
  if (s.implicit_residual(x) > 1e-10)
    throw OffSurface("point is not on the " + std::string(to_string(s.kind())) +
                     " (residual " + std::to_string(s.implicit_residual(x)) + ")");
}
inline double wrap_angle_positive(double t) {
  t = std::fmod(t, 2.0 * std::numbers::pi);
  return t < 0.0 ? t + 2.0 * std::numbers::pi : t;
}
}  // namespace detail

class Circle : public Surface {
 public:
  explicit Circle(double radius = 1.0) : radius_(radius) {
    detail::require_positive(radius, "circle radius");
  }

  SurfaceKind kind() const override { return SurfaceKind::circle; }
  int dim() const override { return 2; }
  double radius() const { return radius_; }

  Box bounding_box() const override {
    return {Point(-radius_, -radius_, 0), Point(radius_, radius_, 0)};
  }

  ClosestPoint closest_point(const Point& z) const override {
    const double n = std::hypot(z[0], z[1]);
    if (n == 0.0) throw SingularPoint("circle closest point undefined at the centre");
    Point x(radius_ * z[0] / n, radius_ * z[1] / n, 0.0);
    return {x, std::abs(n - radius_)};
  }

  double distance(const Point& z) const override {
    return std::abs(std::hypot(z[0], z[1]) - radius_);
  }

  double implicit_residual(const Point& x) const override {
    return std::abs(std::hypot(x[0], x[1]) - radius_) + std::abs(x[2]);
  }

  /// Polar angle in (-pi, pi].
  double angle(const Point& x) const {
    detail::check_on_surface(*this, x);
    return std::atan2(x[1], x[0]);
  }

 private:
  double radius_;
};

/// Closed upper half of the unit circle, endpoints (+-1, 0) included.
class Semicircle : public Surface {
 public:
  SurfaceKind kind() const override { return SurfaceKind::semicircle; }
  int dim() const override { return 2; }
  bool has_boundary() const override { return true; }

  Box bounding_box() const override { return {Point(-1, 0, 0), Point(1, 1, 0)}; }

  ClosestPoint closest_point(const Point& z) const override {
    Point x;
    if (z[1] >= 0.0) {
      const double n = std::hypot(z[0], z[1]);
      if (n == 0.0)
        throw SingularPoint("semicircle closest point undefined at the centre");
      x = Point(z[0] / n, z[1] / n, 0.0);
    } else {
      // Below the diameter the nearest point is an endpoint; ties go to +x.
      x = Point(z[0] >= 0.0 ? 1.0 : -1.0, 0.0, 0.0);
    }
    return {x, (z - x).norm()};
  }

  double distance(const Point& z) const override {
    if (z[1] >= 0.0 && z[0] == 0.0 && z[1] == 0.0) return 1.0;
    return closest_point(z).distance;
  }

  double implicit_residual(const Point& x) const override {
    return std::abs(std::hypot(x[0], x[1]) - 1.0) + std::max(0.0, -x[1]) +
           std::abs(x[2]);
  }

  double angle(const Point& x) const {
    detail::check_on_surface(*this, x);
    return std::atan2(std::max(x[1], 0.0), x[0]);
  }
};

struct EllipseCoords {
  double theta;      ///< parameter in [0, 2 pi): x = a cos, y = b sin
  double arclength;  ///< counterclockwise from (a, 0)
};

/// Ellipse x^2/a^2 + y^2/b^2 = 1, semi-axis a along x and b along y.
class Ellipse : public Surface {
 public:
  Ellipse(double a = 0.75, double b = 1.25) : a_(a), b_(b) {
    detail::require_positive(a, "ellipse semi-axis a");
    detail::require_positive(b, "ellipse semi-axis b");
    perimeter_ = arclength(2.0 * std::numbers::pi);
  }

  SurfaceKind kind() const override { return SurfaceKind::ellipse; }
  int dim() const override { return 2; }
  double a() const { return a_; }
  double b() const { return b_; }
  double perimeter() const { return perimeter_; }

  Box bounding_box() const override { return {Point(-a_, -b_, 0), Point(a_, b_, 0)}; }

  Point point_at(double theta) const {
    return {a_ * std::cos(theta), b_ * std::sin(theta), 0.0};
  }

  ClosestPoint closest_point(const Point& z) const override {
    const double theta = closest_parameter(z);
    const Point x = point_at(theta);
    return {x, (z - x).norm()};
  }

  double implicit_residual(const Point& x) const override {
    const double u = x[0] / a_, v = x[1] / b_;
    return std::abs(u * u + v * v - 1.0) + std::abs(x[2]);
  }

  /// Parameter of the global minimizer of |z - x(theta)|. Scans the
  /// stationarity condition on 64 subintervals, refines each bracketed
  /// minimum by safeguarded Newton and keeps the best.
  double closest_parameter(const Point& z) const {
    constexpr int samples = 64;
    const double two_pi = 2.0 * std::numbers::pi;
    double best_theta = 0.0;
    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](double t) {
      const double d = (z - point_at(t)).squaredNorm();
      if (d < best) {
        best = d;
        best_theta = t;
      }
    };
    double t0 = 0.0;
    double g0 = stationarity(z, t0);
    for (int k = 1; k <= samples; ++k) {
      const double t1 = two_pi * k / samples;
      const double g1 = stationarity(z, t1);
      if (g0 <= 0.0 && g1 > 0.0) consider(refine(z, t0, t1));
      consider(t0);
      t0 = t1;
      g0 = g1;
    }
    return detail::wrap_angle_positive(best_theta);
  }

  /// Arclength from theta = 0 counterclockwise to theta.
  double arclength(double theta) const {
    auto speed = [this](double t) {
      const double s = std::sin(t), c = std::cos(t);
      return std::sqrt(a_ * a_ * s * s + b_ * b_ * c * c);
    };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        speed, 0.0, theta, 15, 1e-13);
  }

  EllipseCoords coords(const Point& x) const {
    detail::check_on_surface(*this, x);
    const double theta = detail::wrap_angle_positive(std::atan2(x[1] / b_, x[0] / a_));
    return {theta, arclength(theta)};
  }

  /// Unit counterclockwise tangent (-y/b^2, x/a^2) / norm.
  Point tangent(const Point& x) const {
    const double tx = -x[1] / (b_ * b_), ty = x[0] / (a_ * a_);
    const double n = std::sqrt(tx * tx + ty * ty);
    return {tx / n, ty / n, 0.0};
  }

 private:
  // Half the theta-derivative of |z - x(theta)|^2.
  double stationarity(const Point& z, double t) const {
    const double s = std::sin(t), c = std::cos(t);
    return a_ * z[0] * s - b_ * z[1] * c + (b_ * b_ - a_ * a_) * s * c;
  }
  double stationarity_derivative(const Point& z, double t) const {
    const double s = std::sin(t), c = std::cos(t);
    return a_ * z[0] * c + b_ * z[1] * s + (b_ * b_ - a_ * a_) * (c * c - s * s);
  }

  double refine(const Point& z, double lo, double hi) const {
    double glo = stationarity(z, lo);
    if (glo == 0.0) return lo;
    double t = 0.5 * (lo + hi);
    const double scale = a_ * (std::abs(z[0]) + a_) + b_ * (std::abs(z[1]) + b_);
    for (int it = 0; it < 100; ++it) {
      const double g = stationarity(z, t);
      if (std::abs(g) <= 1e-15 * scale || hi - lo < 1e-15) return t;
      if ((g < 0.0) == (glo < 0.0)) {
        lo = t;
        glo = g;
      } else {
        hi = t;
      }
      const double dg = stationarity_derivative(z, t);
      double next = dg != 0.0 ? t - g / dg : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      t = next;
    }
    throw NoConvergence("ellipse closest point iteration did not converge");
  }

  double a_, b_;
  double perimeter_ = 0.0;
};

struct SphereCoords {
  double theta;  ///< longitude in (-pi, pi]
  double phi;    ///< latitude in [-pi/2, pi/2]
};

class Sphere : public Surface {
 public:
  explicit Sphere(double radius = 1.0) : radius_(radius) {
    detail::require_positive(radius, "sphere radius");
  }

  SurfaceKind kind() const override { return SurfaceKind::sphere; }
  int dim() const override { return 3; }
  double radius() const { return radius_; }

  Box bounding_box() const override {
    return {Point::Constant(-radius_), Point::Constant(radius_)};
  }

  ClosestPoint closest_point(const Point& z) const override {
    const double n = z.norm();
    if (n == 0.0) throw SingularPoint("sphere closest point undefined at the centre");
    return {z * (radius_ / n), std::abs(n - radius_)};
  }

  double distance(const Point& z) const override { return std::abs(z.norm() - radius_); }

  double implicit_residual(const Point& x) const override {
    return std::abs(x.norm() - radius_);
  }

  SphereCoords coords(const Point& x) const {
    detail::check_on_surface(*this, x);
    return {std::atan2(x[1], x[0]), std::asin(std::clamp(x[2] / radius_, -1.0, 1.0))};
  }

 private:
  double radius_;
};

struct TorusCoords {
  double theta;  ///< around the z axis
  double phi;    ///< around the tube, zero on the outer equator
};

/// Torus ((R + r cos phi) cos theta, (R + r cos phi) sin theta, r sin phi).
class Torus : public Surface {
 public:
  Torus(double major = 1.0, double minor = 0.5) : major_(major), minor_(minor) {
    detail::require_positive(major, "torus major radius");
    detail::require_positive(minor, "torus minor radius");
  }

  SurfaceKind kind() const override { return SurfaceKind::torus; }
  int dim() const override { return 3; }
  double major_radius() const { return major_; }
  double minor_radius() const { return minor_; }

  Box bounding_box() const override {
    const double e = major_ + minor_;
    return {Point(-e, -e, -minor_), Point(e, e, minor_)};
  }

  ClosestPoint closest_point(const Point& z) const override {
    const double rho = std::hypot(z[0], z[1]);
    if (rho == 0.0) throw SingularPoint("torus closest point undefined on the axis");
    const Point core(major_ * z[0] / rho, major_ * z[1] / rho, 0.0);
    const Point v = z - core;
    const double n = v.norm();
    if (n == 0.0) throw SingularPoint("torus closest point undefined on the core circle");
    return {core + v * (minor_ / n), std::abs(n - minor_)};
  }

  double distance(const Point& z) const override {
    return std::abs(std::hypot(std::hypot(z[0], z[1]) - major_, z[2]) - minor_);
  }

  double implicit_residual(const Point& x) const override {
    const double rho = std::hypot(x[0], x[1]);
    return std::abs(std::hypot(rho - major_, x[2]) - minor_);
  }

  Point point_at(double phi, double theta) const {
    const double w = major_ + minor_ * std::cos(phi);
    return {w * std::cos(theta), w * std::sin(theta), minor_ * std::sin(phi)};
  }

  TorusCoords coords(const Point& x) const {
    detail::check_on_surface(*this, x);
    const double rho = std::hypot(x[0], x[1]);
    return {std::atan2(x[1], x[0]), std::atan2(x[2], rho - major_)};
  }

  /// d x / d phi at the surface point x.
  Point phi_tangent(const Point& x) const {
    const double rho = std::hypot(x[0], x[1]);
    const double phi = std::atan2(x[2], rho - major_);
    const double theta = std::atan2(x[1], x[0]);
    return {-minor_ * std::sin(phi) * std::cos(theta),
            -minor_ * std::sin(phi) * std::sin(theta), minor_ * std::cos(phi)};
  }

 private:
  double major_, minor_;
};

/// Triangulated surface. Closest points follow the triangle-loop procedure:
/// only triangles within the tube radius of a node are examined.
class TriMeshSurface : public Surface {
 public:
  explicit TriMeshSurface(TriMesh mesh) : mesh_(std::move(mesh)) {}

  SurfaceKind kind() const override { return SurfaceKind::trimesh; }
  int dim() const override { return 3; }
  const TriMesh& mesh() const { return mesh_; }
  Box bounding_box() const override { return mesh_.bounding_box(); }

  /// Global minimizer over triangles within gamma of z.
  ClosestPoint closest_point_within(const Point& z, double gamma) const {
    ClosestPoint best;
    best.distance = std::numeric_limits<double>::infinity();
    for (std::size_t t : mesh_.triangles_near(z, gamma)) {
      const Point x = mesh_.closest_on(t, z);
      const double d = (z - x).norm();
      if (d < best.distance) best = {x, d, static_cast<int>(t)};
    }
    if (best.triangle < 0 || best.distance > gamma)
      throw OutsideTube("no triangle within the tube radius of the query point");
    return best;
  }

  /// Unrestricted query: grows the search radius until a triangle is found.
  ClosestPoint closest_point(const Point& z) const override {
    const Box& b = mesh_.bounding_box();
    double r = 1e-3 * (b.hi - b.lo).norm() + 1e-12;
    for (;;) {
      try {
        return closest_point_within(z, r);
      } catch (const OutsideTube&) {
        r *= 2.0;
      }
    }
  }

  /// Exhaustive scan over every triangle.
  ClosestPoint closest_point_bruteforce(const Point& z) const {
    ClosestPoint best;
    best.distance = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < mesh_.triangles().size(); ++t) {
      const Point x = mesh_.closest_on(t, z);
      const double d = (z - x).norm();
      if (d < best.distance) best = {x, d, static_cast<int>(t)};
    }
    return best;
  }

  double implicit_residual(const Point& x) const override {
    return closest_point(x).distance;
  }

  /// Nodes within gamma of some triangle's bounding box.
  std::vector<LatticeIndex> candidate_nodes(double dx, double gamma,
                                            const Point& origin = Point::Zero()) const override {
    std::vector<LatticeIndex> out;
    for (std::size_t t = 0; t < mesh_.triangles().size(); ++t) {
      const Box b = mesh_.triangle_box(t).padded(gamma, 3);
      std::array<int, 3> lo{}, hi{};
      for (int k = 0; k < 3; ++k) {
        lo[k] = static_cast<int>(std::ceil((b.lo[k] - origin[k]) / dx));
        hi[k] = static_cast<int>(std::floor((b.hi[k] - origin[k]) / dx));
      }
      for (int i = lo[0]; i <= hi[0]; ++i)
        for (int j = lo[1]; j <= hi[1]; ++j)
          for (int k = lo[2]; k <= hi[2]; ++k) out.push_back({i, j, k});
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  TriMesh mesh_;
};

}  // namespace rbfcpm
