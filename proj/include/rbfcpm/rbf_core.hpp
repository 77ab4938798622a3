#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "rbfcpm/detail/quad.hpp"
#include "rbfcpm/errors.hpp"
#include "rbfcpm/geometry.hpp"
#include "rbfcpm/grid_tube.hpp"

namespace rbfcpm {

enum class KernelFamily {
  gaussian,
  multiquadric,
  inverse_multiquadric,
  inverse_quadratic,
  cubic,
  thin_plate_spline,
};

/// Radial kernel phi(r). Everything is written in terms of r^2 so the
/// Gaussian path never takes a square root. Only the Gaussian is positive
/// definite; the other families fall back to the truncated solve.
struct Kernel {
  double eps = 1.0;
  KernelFamily family = KernelFamily::gaussian;

  template <class T>
  T value_r2(T r2) const {
    using detail::xexp, detail::xlog, detail::xsqrt;
    const T e2 = T(eps) * T(eps);
    switch (family) {
      case KernelFamily::gaussian: return xexp(-e2 * r2);
      case KernelFamily::multiquadric: return xsqrt(T(1) + e2 * r2);
      case KernelFamily::inverse_multiquadric: return T(1) / xsqrt(T(1) + e2 * r2);
      case KernelFamily::inverse_quadratic: return T(1) / (T(1) + e2 * r2);
      case KernelFamily::cubic: return r2 * xsqrt(r2);
      case KernelFamily::thin_plate_spline: return r2 > T(0) ? T(0.5) * r2 * xlog(r2) : T(0);
    }
    return T(0);
  }

  /// Laplacian in `dim` dimensions with respect to the evaluation point.
  template <class T>
  T laplacian_r2(T r2, int dim) const {
    using detail::xexp, detail::xlog, detail::xsqrt;
    const T e2 = T(eps) * T(eps);
    const T d = T(dim);
    switch (family) {
      case KernelFamily::gaussian:
        return xexp(-e2 * r2) * (T(4) * e2 * e2 * r2 - T(2) * d * e2);
      case KernelFamily::multiquadric: {
        const T f = xsqrt(T(1) + e2 * r2);
        return d * e2 / f - e2 * e2 * r2 / (f * f * f);
      }
      case KernelFamily::inverse_multiquadric: {
        const T f = T(1) / xsqrt(T(1) + e2 * r2);
        const T f3 = f * f * f;
        return -d * e2 * f3 + T(3) * e2 * e2 * r2 * f3 * f * f;
      }
      case KernelFamily::inverse_quadratic: {
        const T f = T(1) / (T(1) + e2 * r2);
        return -T(2) * d * e2 * f * f + T(8) * e2 * e2 * r2 * f * f * f;
      }
      case KernelFamily::cubic: return T(3) * (d + T(1)) * xsqrt(r2);
      case KernelFamily::thin_plate_spline:
        return r2 > T(0) ? d * xlog(r2) + d + T(2) : T(0);
    }
    return T(0);
  }

  /// phi'(r)/r, so that d phi / d x_i = factor * (x_i - z_i).
  template <class T>
  T gradient_factor_r2(T r2) const {
    using detail::xexp, detail::xlog, detail::xsqrt;
    const T e2 = T(eps) * T(eps);
    switch (family) {
      case KernelFamily::gaussian: return -T(2) * e2 * xexp(-e2 * r2);
      case KernelFamily::multiquadric: return e2 / xsqrt(T(1) + e2 * r2);
      case KernelFamily::inverse_multiquadric: {
        const T f = T(1) / xsqrt(T(1) + e2 * r2);
        return -e2 * f * f * f;
      }
      case KernelFamily::inverse_quadratic: {
        const T f = T(1) / (T(1) + e2 * r2);
        return -T(2) * e2 * f * f;
      }
      case KernelFamily::cubic: return T(3) * xsqrt(r2);
      case KernelFamily::thin_plate_spline: return r2 > T(0) ? xlog(r2) + T(1) : T(0);
    }
    return T(0);
  }

  double eval(double r) const { return value_r2(r * r); }
  double laplacian(double r, int dim) const { return laplacian_r2(r * r, dim); }
  /// d phi(|x - z|) / d x_axis for displacement x - z.
  double gradient_component(const Point& displacement, int axis) const {
    return gradient_factor_r2(displacement.squaredNorm()) * displacement[axis];
  }
};

/// Dense A(Z, Z) = [phi(|z_i - z_j|)] in double precision.
inline Eigen::MatrixXd collocation_matrix(const Kernel& kernel, std::span<const Point> nodes) {
  const auto m = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd a(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    a(i, i) = kernel.value_r2(0.0);
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double r2 = (nodes[i] - nodes[j]).squaredNorm();
      if (r2 == 0.0) throw DuplicateNodes("collocation nodes must be distinct");
      a(i, j) = a(j, i) = kernel.value_r2(r2);
    }
  }
  return a;
}

/// Symmetric factorization of a collocation matrix in binary128.
/// Tries Cholesky, then Cholesky with diagonal jitter (with iterative
/// refinement against the original matrix), then a truncated eigen
/// decomposition (relative cutoff 1e-30).
class CollocationFactor {
 public:
  using quad = detail::quad;
  enum class Method { cholesky, jittered_cholesky, truncated_eigen };

  CollocationFactor(std::vector<quad> a, int m) : m_(m), a_(std::move(a)) {
    if (cholesky(a_)) {
      method_ = Method::cholesky;
      return;
    }
    quad trace = 0;
    for (int i = 0; i < m_; ++i) trace += a_[i * m_ + i];
    std::vector<quad> jittered = a_;
    const quad jitter = quad(1e-30) * trace / quad(m_);
    for (int i = 0; i < m_; ++i) jittered[i * m_ + i] += jitter;
    if (cholesky(jittered)) {
      method_ = Method::jittered_cholesky;
      return;
    }
    truncated_eigen();
    method_ = Method::truncated_eigen;
  }

  int size() const { return m_; }
  Method method() const { return method_; }
  bool regularized() const { return method_ != Method::cholesky; }
  int effective_rank() const { return rank_; }
  double condition_estimate() const { return condition_; }

  /// Overwrites rhs with A^{-1} rhs.
  void solve(std::span<quad> rhs) const {
    switch (method_) {
      case Method::cholesky: triangular_solves(rhs); break;
      case Method::jittered_cholesky: {
        std::vector<quad> b(rhs.begin(), rhs.end());
        triangular_solves(rhs);
        for (int sweep = 0; sweep < 2; ++sweep) {
          std::vector<quad> r = b;
          for (int i = 0; i < m_; ++i)
            for (int j = 0; j < m_; ++j) r[i] -= a_[i * m_ + j] * rhs[j];
          triangular_solves(r);
          for (int i = 0; i < m_; ++i) rhs[i] += r[i];
        }
        break;
      }
      case Method::truncated_eigen: {
        std::vector<quad> y(m_, quad(0));
        for (int i = 0; i < m_; ++i)
          for (int j = 0; j < m_; ++j) y[i] += pinv_[i * m_ + j] * rhs[j];
        std::copy(y.begin(), y.end(), rhs.begin());
        break;
      }
    }
  }

  /// max |A w - b| for the original (unregularized) matrix.
  quad residual(std::span<const quad> w, std::span<const quad> b) const {
    quad worst = 0;
    for (int i = 0; i < m_; ++i) {
      quad r = -b[i];
      for (int j = 0; j < m_; ++j) r += a_[i * m_ + j] * w[j];
      worst = std::max(worst, detail::xabs(r));
    }
    return worst;
  }

 private:
  bool cholesky(const std::vector<quad>& a) {
    l_.assign(static_cast<std::size_t>(m_) * m_, quad(0));
    for (int j = 0; j < m_; ++j) {
      quad d = a[j * m_ + j];
      for (int k = 0; k < j; ++k) d -= l_[j * m_ + k] * l_[j * m_ + k];
      if (!(d > 0)) return false;
      const quad ljj = detail::xsqrt(d);
      l_[j * m_ + j] = ljj;
      for (int i = j + 1; i < m_; ++i) {
        quad s = a[i * m_ + j];
        for (int k = 0; k < j; ++k) s -= l_[i * m_ + k] * l_[j * m_ + k];
        l_[i * m_ + j] = s / ljj;
      }
    }
    quad lo = l_[0], hi = l_[0];
    for (int i = 0; i < m_; ++i) {
      lo = std::min(lo, l_[i * m_ + i]);
      hi = std::max(hi, l_[i * m_ + i]);
    }
    const double ratio = static_cast<double>(hi / lo);
    condition_ = ratio * ratio;
    rank_ = m_;
    return true;
  }

  void triangular_solves(std::span<quad> x) const {
    for (int i = 0; i < m_; ++i) {
      quad s = x[i];
      const quad* row = &l_[static_cast<std::size_t>(i) * m_];
      for (int k = 0; k < i; ++k) s -= row[k] * x[k];
      x[i] = s / row[i];
    }
    for (int i = m_ - 1; i >= 0; --i) {
      quad s = x[i];
      for (int k = i + 1; k < m_; ++k) s -= l_[static_cast<std::size_t>(k) * m_ + i] * x[k];
      x[i] = s / l_[static_cast<std::size_t>(i) * m_ + i];
    }
  }

  // Cyclic Jacobi eigen decomposition, then pseudo-inverse.
  void truncated_eigen() {
    std::vector<quad> a = a_;
    std::vector<quad> v(static_cast<std::size_t>(m_) * m_, quad(0));
    for (int i = 0; i < m_; ++i) v[i * m_ + i] = 1;
    for (int sweep = 0; sweep < 100; ++sweep) {
      quad off = 0, diag = 0;
      for (int i = 0; i < m_; ++i)
        for (int j = 0; j < m_; ++j)
          (i == j ? diag : off) += a[i * m_ + j] * a[i * m_ + j];
      if (off <= quad(1e-66) * diag) break;
      for (int p = 0; p < m_; ++p)
        for (int q = p + 1; q < m_; ++q) {
          const quad apq = a[p * m_ + q];
          if (apq == 0) continue;
          const quad theta = (a[q * m_ + q] - a[p * m_ + p]) / (2 * apq);
          const quad t = (theta >= 0 ? quad(1) : quad(-1)) /
                         (detail::xabs(theta) + detail::xsqrt(theta * theta + 1));
          const quad c = 1 / detail::xsqrt(t * t + 1);
          const quad s = t * c;
          for (int k = 0; k < m_; ++k) {
            const quad akp = a[k * m_ + p], akq = a[k * m_ + q];
            a[k * m_ + p] = c * akp - s * akq;
            a[k * m_ + q] = s * akp + c * akq;
          }
          for (int k = 0; k < m_; ++k) {
            const quad apk = a[p * m_ + k], aqk = a[q * m_ + k];
            a[p * m_ + k] = c * apk - s * aqk;
            a[q * m_ + k] = s * apk + c * aqk;
          }
          for (int k = 0; k < m_; ++k) {
            const quad vkp = v[k * m_ + p], vkq = v[k * m_ + q];
            v[k * m_ + p] = c * vkp - s * vkq;
            v[k * m_ + q] = s * vkp + c * vkq;
          }
        }
    }
    quad lmax = 0;
    for (int i = 0; i < m_; ++i) lmax = std::max(lmax, detail::xabs(a[i * m_ + i]));
    const quad cutoff = quad(1e-30) * lmax;
    pinv_.assign(static_cast<std::size_t>(m_) * m_, quad(0));
    rank_ = 0;
    quad lmin = lmax;
    for (int k = 0; k < m_; ++k) {
      const quad lam = a[k * m_ + k];
      if (detail::xabs(lam) <= cutoff) continue;
      ++rank_;
      lmin = std::min(lmin, detail::xabs(lam));
      for (int i = 0; i < m_; ++i)
        for (int j = 0; j < m_; ++j) pinv_[i * m_ + j] += v[i * m_ + k] * v[j * m_ + k] / lam;
    }
    condition_ = static_cast<double>(lmax / lmin);
  }

  int m_;
  std::vector<quad> a_;
  std::vector<quad> l_;
  std::vector<quad> pinv_;
  Method method_ = Method::cholesky;
  int rank_ = 0;
  double condition_ = 1.0;
};

/// Translation-invariant description of a stencil: lattice offsets relative
/// to the lexicographically smallest node, plus everything else that enters
/// A(Z_j, Z_j). Mirror images are distinct keys.
struct OffsetSignature {
  int dim = 2;
  double dx = 0.0;
  double eps = 1.0;
  KernelFamily family = KernelFamily::gaussian;
  std::vector<LatticeIndex> offsets;

  bool operator==(const OffsetSignature&) const = default;
};

struct OffsetSignatureHash {
  std::size_t operator()(const OffsetSignature& s) const noexcept {
    std::size_t h = std::hash<double>{}(s.dx) ^ (std::hash<double>{}(s.eps) << 1) ^
                    (static_cast<std::size_t>(s.family) << 7) ^ static_cast<std::size_t>(s.dim);
    LatticeIndexHash ih;
    for (const auto& o : s.offsets) h = h * 1000003u ^ ih(o);
    return h;
  }
};

/// Lattice indices of a stencil in canonical (lexicographic) order, with the
/// matching node ordinals.
struct CanonicalStencil {
  std::vector<std::size_t> ordinals;
  std::vector<LatticeIndex> indices;
  OffsetSignature signature;
};

inline CanonicalStencil canonicalize(const TubeGrid& tube, const Stencil& stencil,
                                     const Kernel& kernel) {
  const std::size_t m = stencil.nodes.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return tube.index(stencil.nodes[a]) < tube.index(stencil.nodes[b]);
  });
  CanonicalStencil c;
  c.ordinals.reserve(m);
  c.indices.reserve(m);
  for (std::size_t k : order) {
    c.ordinals.push_back(stencil.nodes[k]);
    c.indices.push_back(tube.index(stencil.nodes[k]));
  }
  c.signature.dim = tube.dim();
  c.signature.dx = tube.dx();
  c.signature.eps = kernel.eps;
  c.signature.family = kernel.family;
  c.signature.offsets.reserve(m);
  for (const auto& i : c.indices) c.signature.offsets.push_back(i - c.indices.front());
  return c;
}

inline OffsetSignature cache_key(const TubeGrid& tube, const Stencil& stencil,
                                 const Kernel& kernel) {
  return canonicalize(tube, stencil, kernel).signature;
}

inline std::shared_ptr<const CollocationFactor> factor_signature(const OffsetSignature& sig,
                                                                 const Kernel& kernel) {
  using quad = detail::quad;
  const int m = static_cast<int>(sig.offsets.size());
  const quad dx = sig.dx;
  std::vector<quad> a(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i) {
    a[i * m + i] = kernel.value_r2(quad(0));
    for (int j = i + 1; j < m; ++j) {
      const long n2 = squared_norm(sig.offsets[i] - sig.offsets[j]);
      if (n2 == 0) throw DuplicateNodes("stencil repeats a lattice node");
      a[i * m + j] = a[j * m + i] = kernel.value_r2(quad(n2) * dx * dx);
    }
  }
  return std::make_shared<const CollocationFactor>(std::move(a), m);
}

/// Factorizations keyed by offset signature. Safe for concurrent use; the
/// stored values are deterministic so racing inserts are harmless.
class CollocationCache {
 public:
  explicit CollocationCache(bool enabled = true) : enabled_(enabled) {}

  std::shared_ptr<const CollocationFactor> get(const OffsetSignature& sig, const Kernel& kernel) {
    if (!enabled_) {
      ++misses_;
      return factor_signature(sig, kernel);
    }
    {
      std::lock_guard lock(mutex_);
      auto it = map_.find(sig);
      if (it != map_.end()) {
        ++hits_;
        return it->second;
      }
    }
    auto f = factor_signature(sig, kernel);
    std::lock_guard lock(mutex_);
    ++misses_;
    return map_.emplace(sig, std::move(f)).first->second;
  }

  bool enabled() const { return enabled_; }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return map_.size();
  }
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  bool enabled_;
  mutable std::mutex mutex_;
  std::unordered_map<OffsetSignature, std::shared_ptr<const CollocationFactor>,
                     OffsetSignatureHash>
      map_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

enum class OperatorTag { identity, laplacian, d_dx, d_dy, d_dz };

inline std::string_view to_string(OperatorTag t) {
  switch (t) {
    case OperatorTag::identity: return "identity";
    case OperatorTag::laplacian: return "laplacian";
    case OperatorTag::d_dx: return "d/dx";
    case OperatorTag::d_dy: return "d/dy";
    case OperatorTag::d_dz: return "d/dz";
  }
  return "?";
}

inline OperatorTag gradient_tag(int axis) {
  return axis == 0 ? OperatorTag::d_dx : axis == 1 ? OperatorTag::d_dy : OperatorTag::d_dz;
}

/// RBF-FD weights of one operator at one surface point.
struct WeightRow {
  std::vector<std::size_t> nodes;
  std::vector<double> weights;
  OperatorTag tag = OperatorTag::identity;
};

/// Weights w = B(x, Z_j) A(Z_j, Z_j)^{-1} for each requested tag, solved in
/// binary128 and rounded to double.
inline std::vector<WeightRow> weight_rows(const Kernel& kernel, const Point& x,
                                          const TubeGrid& tube, const Stencil& stencil,
                                          std::span<const OperatorTag> tags,
                                          CollocationCache& cache) {
  using quad = detail::quad;
  const CanonicalStencil c = canonicalize(tube, stencil, kernel);
  const auto factor = cache.get(c.signature, kernel);
  const int m = static_cast<int>(c.ordinals.size());
  const int dim = tube.dim();
  const quad dx = tube.dx();

  std::vector<std::array<quad, 3>> disp(m);
  std::vector<quad> r2(m);
  for (int k = 0; k < m; ++k) {
    quad s = 0;
    for (int a = 0; a < 3; ++a) {
      const quad d = a < dim ? quad(x[a]) - quad(tube.origin()[a]) - quad(c.indices[k][a]) * dx
                             : quad(0);
      disp[k][a] = d;
      s += d * d;
    }
    r2[k] = s;
  }

  std::vector<WeightRow> rows;
  rows.reserve(tags.size());
  std::vector<quad> b(m), w(m);
  for (OperatorTag tag : tags) {
    for (int k = 0; k < m; ++k) {
      switch (tag) {
        case OperatorTag::identity: b[k] = kernel.value_r2(r2[k]); break;
        case OperatorTag::laplacian: b[k] = kernel.laplacian_r2(r2[k], dim); break;
        case OperatorTag::d_dx: b[k] = kernel.gradient_factor_r2(r2[k]) * disp[k][0]; break;
        case OperatorTag::d_dy: b[k] = kernel.gradient_factor_r2(r2[k]) * disp[k][1]; break;
        case OperatorTag::d_dz: b[k] = kernel.gradient_factor_r2(r2[k]) * disp[k][2]; break;
      }
    }
    std::copy(b.begin(), b.end(), w.begin());
    factor->solve(w);
    if (factor->regularized() && factor->effective_rank() < m) {
      quad bmax = 0;
      for (quad v : b) bmax = std::max(bmax, detail::xabs(v));
      if (factor->residual(w, b) > quad(1e-6) * bmax)
        throw IllConditioned(
            "RBF-FD weight solve failed for a " + std::to_string(m) +
                "-point stencil (condition estimate " +
                std::to_string(factor->condition_estimate()) +
                "); use a smaller eps*dx or a smaller stencil",
            factor->condition_estimate());
    }
    WeightRow row;
    row.tag = tag;
    row.nodes = c.ordinals;
    row.weights.resize(m);
    for (int k = 0; k < m; ++k) row.weights[k] = static_cast<double>(w[k]);
    for (double v : row.weights)
      if (!std::isfinite(v))
        throw IllConditioned("non-finite RBF-FD weight", factor->condition_estimate());
    rows.push_back(std::move(row));
  }
  return rows;
}

inline WeightRow weight_row(const Kernel& kernel, const Point& x, const TubeGrid& tube,
                            const Stencil& stencil, OperatorTag tag, CollocationCache& cache) {
  const OperatorTag tags[] = {tag};
  return std::move(weight_rows(kernel, x, tube, stencil, tags, cache).front());
}

}  // namespace rbfcpm
