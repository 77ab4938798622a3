#pragma once

#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rbfcpm/errors.hpp"
#include "rbfcpm/grid_tube.hpp"
#include "rbfcpm/parallel.hpp"
#include "rbfcpm/rbf_core.hpp"
#include "rbfcpm/surfaces.hpp"

namespace rbfcpm {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// n_Z x n_Z RBF-FD matrix; row j evaluates the operator at x_j = cp(z_j).
struct SparseOperator {
  OperatorTag tag = OperatorTag::identity;
  SparseMatrix matrix;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::VectorXd operator*(const Eigen::VectorXd& u) const { return matrix * u; }
};

/// Assembles one operator per tag from shared stencils and factorizations.
inline std::vector<SparseOperator> assemble(const TubeGrid& tube, std::span<const Point> points,
                                            std::span<const Stencil> stencils,
                                            const Kernel& kernel,
                                            std::span<const OperatorTag> tags,
                                            CollocationCache& cache) {
  if (points.size() != stencils.size())
    throw Error("assemble: one stencil per surface point required");
  const std::size_t n = points.size();
  std::vector<std::vector<WeightRow>> rows(n);
  parallel_for(n, [&](std::size_t j) {
    try {
      rows[j] = weight_rows(kernel, points[j], tube, stencils[j], tags, cache);
    } catch (const IllConditioned& e) {
      throw IllConditioned("row " + std::to_string(j) + ": " + e.what(), e.condition_estimate());
    }
  });

  std::vector<SparseOperator> ops;
  ops.reserve(tags.size());
  for (std::size_t t = 0; t < tags.size(); ++t) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n * (stencils.empty() ? 0 : stencils.front().nodes.size()));
    for (std::size_t j = 0; j < n; ++j) {
      const WeightRow& r = rows[j][t];
      for (std::size_t k = 0; k < r.nodes.size(); ++k)
        trip.emplace_back(static_cast<int>(j), static_cast<int>(r.nodes[k]), r.weights[k]);
    }
    SparseOperator op;
    op.tag = tags[t];
    op.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(tube.size()));
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    op.matrix.makeCompressed();
    ops.push_back(std::move(op));
  }
  return ops;
}

/// Substitution matrix S realizing the odd extension at ghost nodes: ghost
/// values are replaced by parity * (interpolated value at cp(2cp(z) - z)).
/// Ghost nodes inside the stencils of reflected points are resolved
/// simultaneously, so rows of S only reference interior nodes.
inline SparseMatrix ghost_substitution(const TubeGrid& tube, const GhostInfo& ghosts,
                                       const Kernel& kernel, int m, CollocationCache& cache) {
  const std::size_t n = tube.size();
  std::vector<std::size_t> ghost_nodes;
  std::vector<long> local(n, -1);
  for (std::size_t i = 0; i < ghosts.is_ghost.size(); ++i)
    if (ghosts.is_ghost[i]) {
      local[i] = static_cast<long>(ghost_nodes.size());
      ghost_nodes.push_back(i);
    }

  std::vector<Eigen::Triplet<double>> trip;
  if (ghost_nodes.empty()) {
    SparseMatrix s(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    s.setIdentity();
    return s;
  }

  const auto ng = static_cast<Eigen::Index>(ghost_nodes.size());
  NeighborSearch search(tube, m);
  Eigen::MatrixXd coupling = Eigen::MatrixXd::Identity(ng, ng);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ng, static_cast<Eigen::Index>(n));
  for (Eigen::Index a = 0; a < ng; ++a) {
    const std::size_t g = ghost_nodes[a];
    const Point& xr = ghosts.reflected[g];
    Stencil st;
    try {
      st = search(xr);
    } catch (const InsufficientNodes&) {
      throw GhostStencilMissing("no stencil for the reflected point of ghost node " +
                                std::to_string(g));
    }
    if (st.max_distance > tube.gamma())
      throw GhostStencilMissing("stencil of the reflected point of ghost node " +
                                std::to_string(g) + " leaves the tube; enlarge gamma");
    const WeightRow row = weight_row(kernel, xr, tube, st, OperatorTag::identity, cache);
    for (std::size_t k = 0; k < row.nodes.size(); ++k) {
      const double w = ghosts.parity * row.weights[k];
      if (local[row.nodes[k]] >= 0)
        coupling(a, local[row.nodes[k]]) -= w;
      else
        rhs(a, static_cast<Eigen::Index>(row.nodes[k])) += w;
    }
  }
  const Eigen::MatrixXd resolved = coupling.partialPivLu().solve(rhs);

  for (std::size_t i = 0; i < n; ++i) {
    if (local[i] < 0) {
      trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
      continue;
    }
    for (Eigen::Index c = 0; c < resolved.cols(); ++c) {
      const double v = resolved(local[i], c);
      if (v != 0.0) trip.emplace_back(static_cast<int>(i), static_cast<int>(c), v);
    }
  }
  SparseMatrix s(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  s.setFromTriplets(trip.begin(), trip.end());
  s.makeCompressed();
  return s;
}

/// Effective operator op * S.
inline SparseOperator apply_ghost_extension(const SparseOperator& op, const SparseMatrix& s) {
  SparseOperator out;
  out.tag = op.tag;
  out.matrix = (op.matrix * s).pruned();
  out.matrix.makeCompressed();
  return out;
}

/// Embedding velocity field at surface points: unit counterclockwise tangent
/// on the ellipse, d x / d phi on the torus.
inline std::vector<Point> advection_field(const Surface& surface, std::span<const Point> points) {
  std::vector<Point> t(points.size());
  if (const auto* e = dynamic_cast<const Ellipse*>(&surface)) {
    for (std::size_t i = 0; i < points.size(); ++i) t[i] = e->tangent(points[i]);
  } else if (const auto* tor = dynamic_cast<const Torus*>(&surface)) {
    for (std::size_t i = 0; i < points.size(); ++i) t[i] = tor->phi_tangent(points[i]);
  } else {
    throw Error("no advection field defined for a " + std::string(to_string(surface.kind())));
  }
  return t;
}

/// Coordinate-format dump (1-based, 17 significant digits).
inline void write_matrix_market(std::ostream& os, const SparseMatrix& a) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  os << std::setprecision(17);
  for (Eigen::Index r = 0; r < a.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(a, r); it; ++it)
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

}  // namespace rbfcpm
