#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "rbfcpm/problems.hpp"

using namespace rbfcpm;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST(Problems, NamesRoundTrip) {
  for (ProblemId p : all_problems) EXPECT_EQ(parse_problem(to_string(p)), p);
  EXPECT_THROW(parse_problem("heat_square"), ConfigError);
}

TEST(Problems, ResolveFillsDefaults) {
  ExperimentSpec s;
  s.problem = ProblemId::adv_torus;
  s.dx = 0.1;
  const ExperimentSpec r = resolve(s);
  EXPECT_EQ(r.m, 33);
  EXPECT_DOUBLE_EQ(step_size(*r.dt_rule, r.dx), 0.05);
  EXPECT_EQ(r.surface->kind(), SurfaceKind::torus);
  EXPECT_EQ(*r.t_final, 1.0);

  s.problem = ProblemId::gray_scott;
  s.dx = 0.05;
  const ExperimentSpec g = resolve(s);
  EXPECT_EQ(g.m, 57);
  EXPECT_DOUBLE_EQ(step_size(*g.dt_rule, g.dx), 5.0);
  EXPECT_EQ(*g.t_final, 2000.0);

  s.problem = ProblemId::heat_circle;
  s.m = 12;
  EXPECT_THROW(resolve(s), UnsupportedStencilSize);
  s.m = 0;
  s.dx = -1.0;
  EXPECT_THROW(resolve(s), ConfigError);
}

TEST(ExactSolutions, HeatEquations) {
  Circle c;
  EXPECT_DOUBLE_EQ(exact_solution(ProblemId::heat_circle, c, Point(0, 1, 0), 0.0), 1.0);
  EXPECT_DOUBLE_EQ(exact_solution(ProblemId::heat_circle, c, Point(0, 1, 0), 1.0), std::exp(-1.0));
  Semicircle h;
  EXPECT_NEAR(exact_solution(ProblemId::heat_semicircle, h, Point(1, 0, 0), 0.3), 0.0, 1e-300);
  Sphere s;
  EXPECT_DOUBLE_EQ(exact_solution(ProblemId::heat_sphere, s, Point(0, 0, 1), 0.5), std::exp(-1.0));
  EXPECT_DOUBLE_EQ(exact_solution(ProblemId::heat_sphere, s, Point(0, 0, -1), 0.0), -1.0);
}

TEST(ExactSolutions, AdvectionOnEllipse) {
  Ellipse e;
  const double L = e.perimeter();
  EXPECT_NEAR(exact_solution(ProblemId::adv_ellipse, e, Point(0.75, 0, 0), 0.0), 0.0, 1e-15);
  EXPECT_NEAR(exact_solution(ProblemId::adv_ellipse, e, Point(0, 1.25, 0), 0.0), 1.0, 1e-15);
  // Transport by arclength: the profile at the top at t = L/4 started at s = 0.
  EXPECT_NEAR(exact_solution(ProblemId::adv_ellipse, e, Point(0, 1.25, 0), L / 4), 0.0, 1e-12);
  const double k = 2 * pi / L;
  EXPECT_NEAR(exact_solution(ProblemId::advdiff_ellipse, e, Point(0, 1.25, 0), 0.0), 1.0, 1e-15);
  EXPECT_NEAR(exact_solution(ProblemId::advdiff_ellipse, e, Point(0, 1.25, 0), 1.0,
                             AdvDiffDecay::squared),
              std::exp(-k * k) * std::sin(k * (L / 4 - 1.0)), 1e-14);
  EXPECT_NEAR(exact_solution(ProblemId::advdiff_ellipse, e, Point(0, 1.25, 0), 1.0,
                             AdvDiffDecay::printed),
              std::exp(-k) * std::sin(k * (L / 4 - 1.0)), 1e-14);
}

TEST(ExactSolutions, TorusProfile) {
  EXPECT_EQ(torus_profile(pi), 1.0);
  EXPECT_EQ(torus_profile(-pi), 1.0);
  EXPECT_EQ(torus_profile(0.0), -1.0);
  EXPECT_NEAR(torus_profile(pi / 2), 0.0, 1e-15);
  EXPECT_NEAR(torus_profile(-pi / 2), 0.0, 1e-15);
  // Even and smooth through the joins.
  for (double p = 0.05; p < pi; p += 0.1) EXPECT_NEAR(torus_profile(p), torus_profile(-p), 1e-15);
  EXPECT_NEAR(torus_profile(pi - 1e-3), torus_profile(pi + 1e-3), 1e-12);
  Torus t;
  EXPECT_EQ(exact_solution(ProblemId::adv_torus, t, Point(1.5, 0, 0), 0.0), -1.0);
  EXPECT_NEAR(exact_solution(ProblemId::adv_torus, t, Point(1.5, 0, 0), pi), 1.0, 1e-15);
}

TEST(ExactSolutions, MissingForPatternProblems) {
  Sphere s;
  EXPECT_THROW(exact_solution(ProblemId::perona_malik_sphere, s, Point(0, 0, 1), 0.0), NoExactSolution);
  EXPECT_THROW(exact_solution(ProblemId::gray_scott, s, Point(0, 0, 1), 0.0), NoExactSolution);
  EXPECT_FALSE(has_exact_solution(ProblemId::gray_scott));
  EXPECT_TRUE(has_exact_solution(ProblemId::adv_torus));
}

TEST(Runs, HeatCircleErrorMatchesMeasuredLevel) {
  ExperimentSpec s;
  s.problem = ProblemId::heat_circle;
  s.dx = 0.1;
  const RunResult r = run_experiment(s);
  EXPECT_EQ(r.N, 336u);
  EXPECT_EQ(r.steps, 1000);
  ASSERT_TRUE(r.rel_error);
  EXPECT_LE(*r.rel_error, 1.22e-3 * 1.5);
  EXPECT_GE(*r.rel_error, 1.22e-3 / 1.5);
}

TEST(Runs, DeterministicAcrossRuns) {
  ExperimentSpec s;
  s.problem = ProblemId::adv_ellipse;
  s.dx = 0.1;
  const RunResult a = run_experiment(s), b = run_experiment(s);
  EXPECT_EQ(a.projected[0], b.projected[0]);
  ConvergenceReport ra, rb;
  ra.rows.push_back(to_row(a));
  rb.rows.push_back(to_row(b));
  std::ostringstream sa, sb;
  ra.write_csv(sa, false);
  rb.write_csv(sb, false);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Convergence, RatesFollowErrors) {
  ExperimentSpec s;
  s.problem = ProblemId::heat_circle;
  const double levels[] = {0.2, 0.1};
  const ConvergenceReport rep = convergence_study(s, levels);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_FALSE(rep.rows[0].rate);
  ASSERT_TRUE(rep.rows[1].rate);
  EXPECT_DOUBLE_EQ(*rep.rows[1].rate, std::log2(*rep.rows[0].rel_error / *rep.rows[1].rel_error));
  EXPECT_GT(*rep.rows[1].rate, 2.0);
  EXPECT_NEAR(rep.slope(), *rep.rows[1].rate, 1e-12);

  const double single[] = {0.2};
  const ConvergenceReport one = convergence_study(s, single);
  ASSERT_EQ(one.rows.size(), 1u);
  EXPECT_FALSE(one.rows[0].rate);
  std::ostringstream os;
  one.write_csv(os, false);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "problem,dx,N,m,eps,dt,t_final,rel_error,rate,runtime_seconds");
  EXPECT_NE(os.str().find(",,0\n"), std::string::npos);
}

TEST(Convergence, LevelsMustHalve) {
  const double bad[] = {0.2, 0.15};
  EXPECT_THROW(check_halving(bad), ConfigError);
  const double good[] = {0.1, 0.05, 0.025};
  EXPECT_NO_THROW(check_halving(good));
}

TEST(Convergence, FailedLevelsAreRecorded) {
  ExperimentSpec s;
  s.problem = ProblemId::heat_circle;
  s.dt_rule = StepRule::diffusive(2.0);
  s.t_final = 20.0;
  const double levels[] = {0.2, 0.1};
  const ConvergenceReport rep = convergence_study(s, levels);
  ASSERT_EQ(rep.rows.size(), 2u);
  for (const auto& r : rep.rows) {
    EXPECT_FALSE(r.failure.empty());
    EXPECT_FALSE(r.rel_error);
  }
}

TEST(Slope, LeastSquaresOfPowerLaw) {
  const double dx[] = {0.2, 0.1, 0.05};
  const double e[] = {3 * 0.04, 3 * 0.01, 3 * 0.0025};
  EXPECT_NEAR(loglog_slope(dx, e), 2.0, 1e-12);
}

TEST(InitialData, SeededAndInRange) {
  ExperimentSpec s;
  s.problem = ProblemId::perona_malik_sphere;
  s.dx = 0.2;
  s.seed = 3;
  const ExperimentSpec r = resolve(s);
  const Discretization d = discretize(r);
  const auto a = initial_condition(r, d), b = initial_condition(r, d);
  EXPECT_EQ(a[0], b[0]);
  EXPECT_GE(a[0].minCoeff(), 0.0);
  EXPECT_LE(a[0].maxCoeff(), 1.0);
  ExperimentSpec other = r;
  other.seed = 4;
  EXPECT_NE(initial_condition(other, d)[0], a[0]);

  SeededNoise n1(7), n2(7);
  for (int i = 0; i < 100; ++i) {
    const double u = n1.uniform();
    EXPECT_EQ(u, n2.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(PeronaMalik, SmoothsAndKeepsRange) {
  ExperimentSpec s;
  s.problem = ProblemId::perona_malik_sphere;
  s.dx = 0.1;
  s.pm_steps = 40;
  const RunResult r = run_experiment(s);
  EXPECT_FALSE(r.rel_error);
  EXPECT_LT(r.final.variance, r.initial.variance);
  EXPECT_GE(r.final.min, r.initial.min - 1e-2);
  EXPECT_LE(r.final.max, r.initial.max + 1e-2);
}

TEST(TubeComparison, SmallerThanClassicalTube) {
  Circle c;
  const TubeComparison t = compare_tube_sizes(c, 0.00625, 13);
  EXPECT_EQ(t.rbf_nodes, 5464u);
  EXPECT_EQ(t.classical_nodes, 7276u);
  EXPECT_GE(t.reduction(), 0.2);
}
