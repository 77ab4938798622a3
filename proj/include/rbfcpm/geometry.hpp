#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace rbfcpm {

/// Embedding-space point. 2D problems leave the third coordinate at zero.
using Point = Eigen::Vector3d;

/// Integer lattice coordinates of a grid node (third entry zero in 2D).
using LatticeIndex = std::array<int, 3>;

struct LatticeIndexHash {
  std::size_t operator()(const LatticeIndex& i) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (int c : i) {
      h ^= static_cast<std::uint32_t>(c);
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

inline LatticeIndex operator-(const LatticeIndex& a, const LatticeIndex& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline LatticeIndex operator+(const LatticeIndex& a, const LatticeIndex& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline long squared_norm(const LatticeIndex& a) {
  return static_cast<long>(a[0]) * a[0] + static_cast<long>(a[1]) * a[1] +
         static_cast<long>(a[2]) * a[2];
}

/// Axis-aligned box.
struct Box {
  Point lo = Point::Zero();
  Point hi = Point::Zero();

  Box padded(double pad, int dim) const {
    Box b = *this;
    for (int k = 0; k < dim; ++k) {
      b.lo[k] -= pad;
      b.hi[k] += pad;
    }
    return b;
  }
};

}  // namespace rbfcpm
