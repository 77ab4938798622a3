#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "rbfcpm/errors.hpp"
#include "rbfcpm/grid_tube.hpp"
#include "rbfcpm/operators.hpp"
#include "rbfcpm/rbf_core.hpp"
#include "rbfcpm/surfaces.hpp"
#include "rbfcpm/timestepping.hpp"

namespace rbfcpm {

enum class ProblemId {
  heat_circle,
  heat_semicircle,
  adv_ellipse,
  advdiff_ellipse,
  heat_sphere,
  adv_torus,
  perona_malik_sphere,
  gray_scott,
};

inline constexpr ProblemId all_problems[] = {
    ProblemId::heat_circle,  ProblemId::heat_semicircle, ProblemId::adv_ellipse,
    ProblemId::advdiff_ellipse, ProblemId::heat_sphere,  ProblemId::adv_torus,
    ProblemId::perona_malik_sphere, ProblemId::gray_scott};

inline std::string_view to_string(ProblemId p) {
  switch (p) {
    case ProblemId::heat_circle: return "heat_circle";
    case ProblemId::heat_semicircle: return "heat_semicircle";
    case ProblemId::adv_ellipse: return "adv_ellipse";
    case ProblemId::advdiff_ellipse: return "advdiff_ellipse";
    case ProblemId::heat_sphere: return "heat_sphere";
    case ProblemId::adv_torus: return "adv_torus";
    case ProblemId::perona_malik_sphere: return "perona_malik_sphere";
    case ProblemId::gray_scott: return "gray_scott";
  }
  return "?";
}

inline ProblemId parse_problem(std::string_view s) {
  for (ProblemId p : all_problems)
    if (to_string(p) == s) return p;
  throw ConfigError("unknown problem '" + std::string(s) + "'");
}

/// Decay factor used in the advection-diffusion exact solution:
/// `printed` is exp(-2 pi t / L), `squared` is exp(-(2 pi / L)^2 t). Only the
/// second solves u_t + u_s = u_ss exactly.
enum class AdvDiffDecay { printed, squared };

inline std::string_view to_string(AdvDiffDecay d) {
  return d == AdvDiffDecay::printed ? "printed" : "squared";
}

struct ExperimentSpec {
  ProblemId problem = ProblemId::heat_circle;
  double dx = 0.1;
  int m = 0;  ///< 0 selects the problem default
  double eps = 1.0;
  std::optional<StepRule> dt_rule;
  std::optional<double> t_final;
  std::uint64_t seed = 1;
  AdvDiffDecay advdiff_decay = AdvDiffDecay::squared;
  GridAlignment alignment = GridAlignment::cell;
  GrayScottParams gray_scott;
  double pm_lambda = 5.0;
  long pm_steps = 120;
  double pm_noise = 0.2;
  /// Replaces the default surface (e.g. a triangulated mesh for Gray-Scott).
  std::shared_ptr<const Surface> surface;
};

inline int default_stencil_size(ProblemId p) {
  switch (p) {
    case ProblemId::heat_circle:
    case ProblemId::heat_semicircle:
    case ProblemId::advdiff_ellipse: return 13;
    case ProblemId::adv_ellipse: return 9;
    case ProblemId::heat_sphere:
    case ProblemId::gray_scott: return 57;
    case ProblemId::adv_torus:
    case ProblemId::perona_malik_sphere: return 33;
  }
  return 13;
}

inline StepRule default_step_rule(const ExperimentSpec& s) {
  switch (s.problem) {
    case ProblemId::adv_ellipse:
    case ProblemId::adv_torus: return StepRule::advective(0.5);
    case ProblemId::perona_malik_sphere: return StepRule::diffusive(0.2);
    case ProblemId::gray_scott: return StepRule::scaled_diffusive(0.1, s.gray_scott.Du);
    default: return StepRule::diffusive(0.1);
  }
}

inline std::shared_ptr<const Surface> default_surface(ProblemId p) {
  switch (p) {
    case ProblemId::heat_circle: return std::make_shared<Circle>(1.0);
    case ProblemId::heat_semicircle: return std::make_shared<Semicircle>();
    case ProblemId::adv_ellipse:
    case ProblemId::advdiff_ellipse: return std::make_shared<Ellipse>(0.75, 1.25);
    case ProblemId::heat_sphere:
    case ProblemId::perona_malik_sphere:
    case ProblemId::gray_scott: return std::make_shared<Sphere>(1.0);
    case ProblemId::adv_torus: return std::make_shared<Torus>(1.0, 0.5);
  }
  return nullptr;
}

/// Spec with every default filled in.
inline ExperimentSpec resolve(ExperimentSpec s) {
  if (s.m == 0) s.m = default_stencil_size(s.problem);
  if (!s.dt_rule) s.dt_rule = default_step_rule(s);
  if (!s.surface) s.surface = default_surface(s.problem);
  if (!s.t_final) {
    if (s.problem == ProblemId::perona_malik_sphere)
      s.t_final = static_cast<double>(s.pm_steps) * step_size(*s.dt_rule, s.dx);
    else if (s.problem == ProblemId::gray_scott)
      s.t_final = 2000.0;
    else
      s.t_final = 1.0;
  }
  if (!(s.dx > 0.0)) throw ConfigError("dx must be positive");
  if (!(s.eps > 0.0)) throw ConfigError("eps must be positive");
  stencil_shell(s.m, s.surface->dim());
  return s;
}

/// Smooth periodic profile on the torus: g((phi + pi)/pi) for phi <= 0 and
/// g((pi - phi)/pi) for phi > 0, with phi wrapped into [-pi, pi).
inline double torus_bump(double s) {
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return -1.0;
  const double a = std::exp(1.0 / (s - 1.0));
  const double b = std::exp(-1.0 / s);
  return (a - b) / (b + a);
}

inline double torus_profile(double phi) {
  const double pi = std::numbers::pi;
  phi = std::fmod(phi + pi, 2.0 * pi);
  if (phi < 0.0) phi += 2.0 * pi;
  phi -= pi;
  return phi <= 0.0 ? torus_bump((phi + pi) / pi) : torus_bump((pi - phi) / pi);
}

inline bool has_exact_solution(ProblemId p) {
  return p != ProblemId::perona_malik_sphere && p != ProblemId::gray_scott;
}

/// Closed-form solution at surface point x and time t.
inline double exact_solution(ProblemId problem, const Surface& surface, const Point& x, double t,
                             AdvDiffDecay decay = AdvDiffDecay::squared) {
  const double two_pi = 2.0 * std::numbers::pi;
  switch (problem) {
    case ProblemId::heat_circle:
      return std::exp(-t) * std::sin(dynamic_cast<const Circle&>(surface).angle(x));
    case ProblemId::heat_semicircle:
      return std::exp(-t) * std::sin(dynamic_cast<const Semicircle&>(surface).angle(x));
    case ProblemId::adv_ellipse: {
      const auto& e = dynamic_cast<const Ellipse&>(surface);
      const double v = std::sin(two_pi * (e.coords(x).arclength - t) / e.perimeter());
      return v * v * v;
    }
    case ProblemId::advdiff_ellipse: {
      const auto& e = dynamic_cast<const Ellipse&>(surface);
      const double k = two_pi / e.perimeter();
      const double amp = decay == AdvDiffDecay::printed ? std::exp(-k * t) : std::exp(-k * k * t);
      return amp * std::sin(k * (e.coords(x).arclength - t));
    }
    case ProblemId::heat_sphere:
      return std::exp(-2.0 * t) * std::sin(dynamic_cast<const Sphere&>(surface).coords(x).phi);
    case ProblemId::adv_torus:
      return torus_profile(dynamic_cast<const Torus&>(surface).coords(x).phi - t);
    case ProblemId::perona_malik_sphere:
    case ProblemId::gray_scott:
      break;
  }
  throw NoExactSolution(std::string(to_string(problem)) + " has no closed-form solution");
}

/// Tube, stencils and the RBF-FD operators for one surface and grid.
struct Discretization {
  std::shared_ptr<const Surface> surface;
  Kernel kernel;
  int m = 0;
  Tube tube;
  std::vector<Stencil> stencils;
  SparseOperator P;  ///< projection (ghost-extended when ghosts exist)
  SparseOperator W;  ///< Laplacian (ghost-extended when ghosts exist)
  std::vector<SparseOperator> G;  ///< gradient components
  SparseMatrix S;                 ///< ghost substitution (identity otherwise)
  std::size_t distinct_signatures = 0;

  std::size_t size() const { return tube.grid.size(); }
  const std::vector<Point>& points() const { return tube.cp.points; }
};

struct DiscretizationOptions {
  bool laplacian = true;
  bool gradient = false;
  double gamma = 0.0;  ///< 0 selects tube_radius_for_m
  bool use_cache = true;
  GridAlignment alignment = GridAlignment::cell;
};

inline Discretization discretize(std::shared_ptr<const Surface> surface, double dx, int m,
                                 const Kernel& kernel, const DiscretizationOptions& opt = {}) {
  Discretization d;
  d.surface = std::move(surface);
  d.kernel = kernel;
  d.m = m;
  const int dim = d.surface->dim();
  const double gamma = opt.gamma > 0.0 ? opt.gamma : tube_radius_for_m(m, dim, dx);
  d.tube = build_tube(*d.surface, dx, gamma, lattice_origin(opt.alignment, dx, dim));
  d.stencils = build_stencils(d.tube.grid, d.tube.cp.points, m);

  std::vector<OperatorTag> tags{OperatorTag::identity};
  if (opt.laplacian) tags.push_back(OperatorTag::laplacian);
  if (opt.gradient)
    for (int a = 0; a < dim; ++a) tags.push_back(gradient_tag(a));
  CollocationCache cache(opt.use_cache);
  auto ops = assemble(d.tube.grid, d.tube.cp.points, d.stencils, kernel, tags, cache);
  std::size_t k = 0;
  d.P = std::move(ops[k++]);
  if (opt.laplacian) d.W = std::move(ops[k++]);
  for (; k < ops.size(); ++k) d.G.push_back(std::move(ops[k]));

  d.S = ghost_substitution(d.tube.grid, d.tube.cp.ghosts, kernel, m, cache);
  if (d.tube.cp.ghosts.count() > 0) {
    d.P = apply_ghost_extension(d.P, d.S);
    if (opt.laplacian) d.W = apply_ghost_extension(d.W, d.S);
    for (auto& g : d.G) g = apply_ghost_extension(g, d.S);
  }
  d.distinct_signatures = cache.enabled() ? cache.size() : 0;
  return d;
}

/// max_j |(P U)_j - u(x_j, t)| / max_j |u(x_j, t)|.
inline double relative_error(const Vector& projected, ProblemId problem, const Surface& surface,
                             std::span<const Point> points, double t,
                             AdvDiffDecay decay = AdvDiffDecay::squared) {
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double u = exact_solution(problem, surface, points[j], t, decay);
    num = std::max(num, std::abs(projected[static_cast<Eigen::Index>(j)] - u));
    den = std::max(den, std::abs(u));
  }
  return num / den;
}

/// Deterministic uniform variates in [0, 1) from a 64-bit Mersenne Twister.
class SeededNoise {
 public:
  explicit SeededNoise(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  /// Box-Muller normal variate.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Smooth stripe texture on the sphere used as the denoising image.
inline double stripe_texture(const Point& x) {
  return 0.5 + 0.5 * std::tanh(4.0 * std::sin(3.0 * std::numbers::pi * x[2]) +
                               2.0 * std::sin(4.0 * std::atan2(x[1], x[0])));
}

struct FieldStats {
  double min = 0.0, max = 0.0, mean = 0.0, variance = 0.0;
  double stddev() const { return std::sqrt(variance); }
};

inline FieldStats field_stats(const Vector& v) {
  FieldStats s;
  s.min = v.minCoeff();
  s.max = v.maxCoeff();
  s.mean = v.mean();
  s.variance = (v.array() - s.mean).square().mean();
  return s;
}

struct RunResult {
  ExperimentSpec spec;  ///< resolved
  std::size_t N = 0;
  double gamma = 0.0;
  double dt = 0.0;
  long steps = 0;
  std::optional<double> rel_error;
  double runtime_seconds = 0.0;
  std::size_t distinct_signatures = 0;
  std::size_t ghosts = 0;
  SolverState state;
  std::vector<Vector> projected;  ///< P U per component at the final time
  std::vector<Point> points;      ///< surface points x_j
  std::vector<Point> nodes;       ///< grid nodes z_j
  FieldStats initial;             ///< projected first component at t = 0
  FieldStats final;               ///< projected first component at the end
  double overall_min = 0.0, overall_max = 0.0;  ///< over all components and steps
};

namespace detail {
inline Vector evaluate(const std::vector<Point>& pts, auto&& f) {
  Vector v(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t j = 0; j < pts.size(); ++j) v[static_cast<Eigen::Index>(j)] = f(pts[j]);
  return v;
}
}  // namespace detail

inline std::vector<Vector> initial_condition(const ExperimentSpec& spec, const Discretization& d) {
  const auto& pts = d.points();
  const Surface& s = *d.surface;
  switch (spec.problem) {
    case ProblemId::perona_malik_sphere: {
      SeededNoise noise(spec.seed);
      Vector u = detail::evaluate(pts, stripe_texture);
      for (Eigen::Index j = 0; j < u.size(); ++j) u[j] += spec.pm_noise * noise.normal();
      const double lo = u.minCoeff(), hi = u.maxCoeff();
      u = (u.array() - lo) / (hi - lo);
      return {u};
    }
    case ProblemId::gray_scott: {
      SeededNoise noise(spec.seed);
      // Seed patch centred on the surface point furthest along a fixed direction.
      const Point dir = Point(0.3, 0.5, 0.8).normalized();
      Point centre = pts.front();
      for (const auto& p : pts)
        if (p.dot(dir) > centre.dot(dir)) centre = p;
      Vector u = Vector::Ones(static_cast<Eigen::Index>(pts.size()));
      Vector v = Vector::Zero(static_cast<Eigen::Index>(pts.size()));
      for (std::size_t j = 0; j < pts.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        if ((pts[j] - centre).norm() < 0.15) {
          u[i] = 0.5;
          v[i] = 0.25;
        }
        u[i] += 0.02 * (2.0 * noise.uniform() - 1.0);
        v[i] += 0.02 * (2.0 * noise.uniform() - 1.0);
      }
      return {u, v};
    }
    default:
      return {detail::evaluate(pts, [&](const Point& x) {
        return exact_solution(spec.problem, s, x, 0.0, spec.advdiff_decay);
      })};
  }
}

inline DiscretizationOptions discretization_options(const ExperimentSpec& spec) {
  DiscretizationOptions opt;
  opt.alignment = spec.alignment;
  opt.gradient = spec.problem == ProblemId::adv_ellipse ||
                 spec.problem == ProblemId::advdiff_ellipse ||
                 spec.problem == ProblemId::adv_torus ||
                 spec.problem == ProblemId::perona_malik_sphere;
  opt.laplacian = spec.problem != ProblemId::adv_ellipse &&
                  spec.problem != ProblemId::adv_torus &&
                  spec.problem != ProblemId::perona_malik_sphere;
  return opt;
}

/// Operators for a resolved spec.
inline Discretization discretize(const ExperimentSpec& spec) {
  return discretize(spec.surface, spec.dx, spec.m, Kernel{spec.eps, KernelFamily::gaussian},
                    discretization_options(spec));
}

/// Time integration on a prepared discretization; `spec` must be resolved.
inline RunResult run_experiment(const ExperimentSpec& spec, const Discretization& d,
                                const ProgressCallback& progress = {}, long progress_every = 0) {
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.spec = spec;
  r.N = d.size();
  r.gamma = d.tube.grid.gamma();
  r.distinct_signatures = d.distinct_signatures;
  r.ghosts = d.tube.cp.ghosts.count();
  r.points = d.points();
  r.nodes.reserve(r.N);
  for (std::size_t i = 0; i < r.N; ++i) r.nodes.push_back(d.tube.grid.position(i));
  r.dt = step_size(*spec.dt_rule, spec.dx);

  SolverState& state = r.state;
  state.fields = initial_condition(spec, d);
  r.initial = field_stats(d.P.matrix * state.fields.front());
  r.overall_min = r.initial.min;
  r.overall_max = r.initial.max;

  const SparseMatrix& P = d.P.matrix;
  std::vector<Point> velocity;
  if (!d.G.empty() && spec.problem != ProblemId::perona_malik_sphere)
    velocity = advection_field(*d.surface, d.points());
  auto advect = [&](const Vector& u) {
    Vector out = Vector::Zero(u.size());
    for (std::size_t a = 0; a < d.G.size(); ++a) {
      const Vector gu = d.G[a].matrix * u;
      for (Eigen::Index j = 0; j < u.size(); ++j)
        out[j] -= velocity[static_cast<std::size_t>(j)][static_cast<int>(a)] * gu[j];
    }
    return out;
  };

  using Fields = std::vector<Vector>;
  switch (spec.problem) {
    case ProblemId::heat_circle:
    case ProblemId::heat_semicircle:
    case ProblemId::heat_sphere: {
      LinearEulerStepper stepper(P, d.W.matrix, r.dt);
      integrate(state, *spec.t_final, r.dt,
                [&](const Fields& f, double h) { return Fields{stepper.step(f[0], h)}; },
                progress, progress_every);
      break;
    }
    case ProblemId::advdiff_ellipse: {
      integrate(state, *spec.t_final, r.dt,
                [&](const Fields& f, double h) {
                  return Fields{Vector(P * f[0] + h * (d.W.matrix * f[0] + advect(f[0])))};
                },
                progress, progress_every);
      break;
    }
    case ProblemId::adv_ellipse:
    case ProblemId::adv_torus: {
      auto stage = [&](const Vector& v, double h) -> Vector { return P * v + h * advect(v); };
      integrate(state, *spec.t_final, r.dt,
                [&](const Fields& f, double h) { return Fields{ssprk3_step(stage, h, f[0])}; },
                progress, progress_every);
      break;
    }
    case ProblemId::perona_malik_sphere: {
      integrate(state, *spec.t_final, r.dt,
                [&](const Fields& f, double h) {
                  return Fields{Vector(P * f[0] + h * perona_malik_rhs(f[0], d.G, spec.pm_lambda))};
                },
                progress, progress_every);
      break;
    }
    case ProblemId::gray_scott: {
      const SparseMatrix& W = d.W.matrix;
      integrate(state, *spec.t_final, r.dt,
                [&](const Fields& f, double h) {
                  auto [ru, rv] = gray_scott_rhs(f[0], f[1], P, W, spec.gray_scott);
                  Fields next{Vector(P * f[0] + h * ru), Vector(P * f[1] + h * rv)};
                  for (const auto& c : next) {
                    r.overall_min = std::min(r.overall_min, c.minCoeff());
                    r.overall_max = std::max(r.overall_max, c.maxCoeff());
                  }
                  return next;
                },
                progress, progress_every);
      break;
    }
  }
  r.steps = state.step;
  for (const auto& f : state.fields) r.projected.push_back(P * f);
  r.final = field_stats(r.projected.front());
  if (spec.problem != ProblemId::gray_scott) {
    r.overall_min = std::min(r.overall_min, r.final.min);
    r.overall_max = std::max(r.overall_max, r.final.max);
  }
  if (has_exact_solution(spec.problem))
    r.rel_error = relative_error(r.projected.front(), spec.problem, *d.surface, d.points(),
                                 state.t, spec.advdiff_decay);
  r.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Discretizes and runs; runtime_seconds covers both.
inline RunResult run_experiment(const ExperimentSpec& input, const ProgressCallback& progress = {},
                                long progress_every = 0) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentSpec spec = resolve(input);
  const Discretization d = discretize(spec);
  RunResult r = run_experiment(spec, d, progress, progress_every);
  r.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

struct ConvergenceRow {
  double dx = 0.0;
  std::size_t N = 0;
  int m = 0;
  double eps = 1.0;
  double dt = 0.0;
  double t_final = 0.0;
  std::optional<double> rel_error;
  std::optional<double> rate;  ///< log2(e_{2dx} / e_dx)
  double runtime_seconds = 0.0;
  std::string failure;  ///< non-empty when the level failed
};

/// Least-squares slope of log(error) against log(dx).
inline double loglog_slope(std::span<const double> dx, std::span<const double> err) {
  const std::size_t n = dx.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(dx[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct ConvergenceReport {
  ProblemId problem = ProblemId::heat_circle;
  std::vector<ConvergenceRow> rows;

  std::vector<double> errors() const {
    std::vector<double> e;
    for (const auto& r : rows) e.push_back(r.rel_error.value_or(NAN));
    return e;
  }

  double slope() const {
    std::vector<double> x, y;
    for (const auto& r : rows)
      if (r.rel_error) {
        x.push_back(r.dx);
        y.push_back(*r.rel_error);
      }
    return loglog_slope(x, y);
  }

  /// Columns: problem,dx,N,m,eps,dt,t_final,rel_error,rate,runtime_seconds.
  /// With timing=false the runtime column is written as 0 so that reports
  /// are byte-for-byte reproducible.
  void write_csv(std::ostream& os, bool timing = true) const {
    auto num = [](double v) {
      char buf[32];
      const auto r = std::to_chars(buf, buf + sizeof buf, v);
      return std::string(buf, r.ptr);
    };
    os << "problem,dx,N,m,eps,dt,t_final,rel_error,rate,runtime_seconds\n";
    for (const auto& r : rows) {
      os << to_string(problem) << ',' << num(r.dx) << ',' << r.N << ',' << r.m << ','
         << num(r.eps) << ',' << num(r.dt) << ',' << num(r.t_final) << ',';
      if (r.rel_error) os << num(*r.rel_error);
      os << ',';
      if (r.rate) os << num(*r.rate);
      os << ',' << num(timing ? r.runtime_seconds : 0.0) << '\n';
    }
  }
};

inline ConvergenceRow to_row(const RunResult& r) {
  ConvergenceRow row;
  row.dx = r.spec.dx;
  row.N = r.N;
  row.m = r.spec.m;
  row.eps = r.spec.eps;
  row.dt = r.dt;
  row.t_final = *r.spec.t_final;
  row.rel_error = r.rel_error;
  row.runtime_seconds = r.runtime_seconds;
  return row;
}

inline void check_halving(std::span<const double> levels) {
  if (levels.empty()) throw ConfigError("at least one grid level is required");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (std::abs(levels[i] - 0.5 * levels[i - 1]) > 1e-12 * levels[i - 1])
      throw ConfigError("grid levels must halve: " + std::to_string(levels[i - 1]) + " -> " +
                        std::to_string(levels[i]));
}

/// Runs spec at every level and fills in rates between consecutive levels.
/// Failed levels are recorded and leave their neighbouring rates empty.
inline ConvergenceReport convergence_study(const ExperimentSpec& spec,
                                           std::span<const double> levels) {
  check_halving(levels);
  ConvergenceReport rep;
  rep.problem = spec.problem;
  for (double dx : levels) {
    ExperimentSpec s = spec;
    s.dx = dx;
    try {
      rep.rows.push_back(to_row(run_experiment(s)));
    } catch (const Error& e) {
      ConvergenceRow row;
      row.dx = dx;
      row.failure = e.what();
      rep.rows.push_back(row);
    }
  }
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& a = rep.rows[i - 1].rel_error;
    const auto& b = rep.rows[i].rel_error;
    if (a && b) rep.rows[i].rate = std::log2(*a / *b);
  }
  return rep;
}

struct SpectrumResult {
  std::size_t N = 0;
  double radius_projection = 0.0;  ///< max |eig(P + dt W)|
  double radius_identity = 0.0;    ///< max |eig(I + dt W)|
  Eigen::VectorXcd eig_projection;
  Eigen::VectorXcd eig_identity;
};

inline double spectral_radius(const Eigen::VectorXcd& ev) {
  return ev.size() == 0 ? 0.0 : ev.cwiseAbs().maxCoeff();
}

/// Dense eigenvalues of the forward-Euler heat operators on the unit circle.
inline SpectrumResult spectrum_check(double dx = 0.025, int m = 13, double dt = 1e-6,
                                     double eps = 1.0,
                                     GridAlignment alignment = GridAlignment::cell) {
  DiscretizationOptions opt;
  opt.alignment = alignment;
  const Discretization d = discretize(std::make_shared<Circle>(1.0), dx, m,
                                      Kernel{eps, KernelFamily::gaussian}, opt);
  SpectrumResult r;
  r.N = d.size();
  if (r.N > 3000) throw Error("tube too large for a dense eigensolve");
  const Eigen::MatrixXd w = Eigen::MatrixXd(d.W.matrix);
  const Eigen::MatrixXd p = Eigen::MatrixXd(d.P.matrix);
  const auto n = static_cast<Eigen::Index>(r.N);
  Eigen::EigenSolver<Eigen::MatrixXd> es;
  es.compute(p + dt * w, false);
  r.eig_projection = es.eigenvalues();
  es.compute(Eigen::MatrixXd::Identity(n, n) + dt * w, false);
  r.eig_identity = es.eigenvalues();
  r.radius_projection = spectral_radius(r.eig_projection);
  r.radius_identity = spectral_radius(r.eig_identity);
  return r;
}

/// Node counts of the RBF tube for stencil size m and of the classical
/// closest point method tube with degree-p interpolation, same grid.
struct TubeComparison {
  std::size_t rbf_nodes = 0;
  std::size_t classical_nodes = 0;
  double reduction() const {
    return 1.0 - static_cast<double>(rbf_nodes) / static_cast<double>(classical_nodes);
  }
};

inline TubeComparison compare_tube_sizes(const Surface& surface, double dx, int m, int p = 3,
                                         GridAlignment alignment = GridAlignment::cell) {
  const int dim = surface.dim();
  const Point origin = lattice_origin(alignment, dx, dim);
  return {count_tube_nodes(surface, dx, tube_radius_for_m(m, dim, dx), origin),
          count_tube_nodes(surface, dx, classical_cpm_tube_radius(p, dim, dx), origin)};
}

}  // namespace rbfcpm
