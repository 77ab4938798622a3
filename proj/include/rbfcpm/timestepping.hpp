#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Sparse>

#include "rbfcpm/errors.hpp"
#include "rbfcpm/operators.hpp"

namespace rbfcpm {

using Vector = Eigen::VectorXd;

/// Grid values of every PDE component plus the clock.
struct SolverState {
  std::vector<Vector> fields;
  double t = 0.0;
  long step = 0;
};

inline constexpr double divergence_threshold = 1e6;

/// Throws Diverged on a non-finite entry or max-norm above 1e6.
inline void check_finite(const Vector& u, long step) {
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double v = u[i];
    if (!std::isfinite(v) || std::abs(v) > divergence_threshold)
      throw Diverged("solution diverged at step " + std::to_string(step) + " (node " +
                         std::to_string(i) + ", value " + std::to_string(v) + ")",
                     step);
  }
}

/// U' = (P + dt W) U as two mat-vecs.
inline Vector euler_step_linear(const SparseMatrix& p, const SparseMatrix& w, double dt,
                                const Vector& u) {
  if (!(dt >= 0.0)) throw Error("time step must be non-negative");
  Vector out = p * u;
  if (dt != 0.0) out.noalias() += dt * (w * u);
  return out;
}

/// Forward Euler with the precomposed operator P + dt W.
class LinearEulerStepper {
 public:
  LinearEulerStepper(const SparseMatrix& p, const SparseMatrix& w, double dt)
      : p_(p), w_(w), dt_(dt), combined_(p + dt * w) {
    combined_.makeCompressed();
  }

  double dt() const { return dt_; }
  Vector operator()(const Vector& u) const { return combined_ * u; }
  /// Step of arbitrary length, used for the shortened final step.
  Vector step(const Vector& u, double dt) const {
    return dt == dt_ ? Vector(combined_ * u) : euler_step_linear(p_, w_, dt, u);
  }

 private:
  const SparseMatrix& p_;
  const SparseMatrix& w_;
  double dt_;
  SparseMatrix combined_;
};

/// One SSP-RK3 (Shu-Osher) step written as convex combinations of Euler
/// stages. `stage(v, dt)` returns the forward-Euler update of v; pass
/// v + dt f(v) for the textbook scheme, or P v + dt f(v) for the closest
/// point form.
template <class Stage>
Vector ssprk3_step(Stage&& stage, double dt, const Vector& u) {
  const Vector u1 = stage(u, dt);
  const Vector u2 = 0.75 * u + 0.25 * stage(u1, dt);
  return (1.0 / 3.0) * u + (2.0 / 3.0) * stage(u2, dt);
}

/// SSP-RK3 for u' = f(u).
template <class Rhs>
Vector ssprk3_step_rhs(Rhs&& rhs, double dt, const Vector& u) {
  return ssprk3_step([&](const Vector& v, double h) -> Vector { return v + h * rhs(v); }, dt, u);
}

/// Nonlinear Perona-Malik flux divergence sum_i G_i (g(|G u|) G_i u) with
/// g(s) = 1 / (1 + (s/lambda)^2). Gradient values at x_j are reused as the
/// extension at z_j.
inline Vector perona_malik_rhs(const Vector& u, std::span<const SparseOperator> gradient,
                               double lambda) {
  if (!(lambda > 0.0)) throw Error("Perona-Malik lambda must be positive");
  std::vector<Vector> p;
  p.reserve(gradient.size());
  for (const auto& g : gradient) p.push_back(g.matrix * u);
  Vector mag2 = Vector::Zero(u.size());
  for (const auto& pi : p) mag2 += pi.cwiseAbs2();
  const Vector g = (1.0 + mag2.array() / (lambda * lambda)).inverse().matrix();
  Vector rhs = Vector::Zero(u.size());
  for (std::size_t i = 0; i < gradient.size(); ++i)
    rhs += gradient[i].matrix * Vector(g.cwiseProduct(p[i]));
  return rhs;
}

struct GrayScottParams {
  double F = 0.03;
  double k = 0.062;
  double Du = 5e-5;
  double Dv = 2.5e-5;
};

/// Right-hand sides of the Gray-Scott system at x_j: reactions act on the
/// projected values P u and P v, diffusion through W.
inline std::pair<Vector, Vector> gray_scott_rhs(const Vector& u, const Vector& v,
                                                const SparseMatrix& p, const SparseMatrix& w,
                                                const GrayScottParams& prm) {
  const Vector pu = p * u;
  const Vector pv = p * v;
  const Vector uvv = pu.cwiseProduct(pv).cwiseProduct(pv);
  Vector ru = prm.F * (Vector::Ones(u.size()) - pu) - uvv + prm.Du * (w * u);
  Vector rv = -(prm.F + prm.k) * pv + uvv + prm.Dv * (w * v);
  return {std::move(ru), std::move(rv)};
}

/// Time-step rules: c dx^2, c dx, or (c / D) dx^2.
struct StepRule {
  enum class Kind { diffusive, advective, scaled_diffusive };
  Kind kind = Kind::diffusive;
  double c = 0.1;
  double D = 1.0;

  static StepRule diffusive(double c) { return {Kind::diffusive, c, 1.0}; }
  static StepRule advective(double c) { return {Kind::advective, c, 1.0}; }
  static StepRule scaled_diffusive(double c, double d) { return {Kind::scaled_diffusive, c, d}; }
};

inline double step_size(const StepRule& rule, double dx) {
  switch (rule.kind) {
    case StepRule::Kind::diffusive: return rule.c * dx * dx;
    case StepRule::Kind::advective: return rule.c * dx;
    case StepRule::Kind::scaled_diffusive: return rule.c / rule.D * dx * dx;
  }
  return 0.0;
}

/// Progress report: (time, step, min, max) of the first component.
using ProgressCallback = std::function<void(const SolverState&)>;

/// Advances `state` to t_final with steps of dt, shortening the last step so
/// the final time is hit exactly. `step(state_fields, h)` must return the
/// updated fields.
template <class Step>
void integrate(SolverState& state, double t_final, double dt, Step&& step,
               const ProgressCallback& progress = {}, long every = 0) {
  if (!(dt > 0.0)) throw Error("time step must be positive");
  const long n = static_cast<long>(std::ceil((t_final - state.t) / dt - 1e-9));
  const double t0 = state.t;
  for (long s = 0; s < n; ++s) {
    const double h = s + 1 == n ? (t_final - t0) - static_cast<double>(n - 1) * dt : dt;
    state.fields = step(state.fields, h);
    ++state.step;
    state.t = s + 1 == n ? t_final : t0 + static_cast<double>(s + 1) * dt;
    for (const auto& f : state.fields) check_finite(f, state.step);
    if (progress && every > 0 && state.step % every == 0) progress(state);
  }
}

}  // namespace rbfcpm
