#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "rbfcpm/timestepping.hpp"

using namespace rbfcpm;

namespace {

SparseMatrix random_sparse(int n, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), p(0.0, 1.0);
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i == j || p(rng) < density) t.emplace_back(i, j, u(rng));
  SparseMatrix a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

Vector random_vector(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// Periodic centred difference on n points of spacing h.
SparseMatrix periodic_difference(int n, double h) {
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, (i + 1) % n, 0.5 / h);
    t.emplace_back(i, (i + n - 1) % n, -0.5 / h);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

}  // namespace

TEST(Euler, ZeroStepIsProjection) {
  const SparseMatrix p = random_sparse(40, 0.2, 1), w = random_sparse(40, 0.2, 2);
  const Vector u = random_vector(40, 3);
  const Vector pu = p * u;
  EXPECT_EQ(euler_step_linear(p, w, 0.0, u), pu);
  EXPECT_THROW(euler_step_linear(p, w, -1.0, u), Error);
}

TEST(Euler, MatchesDenseUpdate) {
  const SparseMatrix p = random_sparse(60, 0.1, 4), w = random_sparse(60, 0.1, 5);
  const Vector u = random_vector(60, 6);
  const double dt = 1e-3;
  const Vector dense = (Eigen::MatrixXd(p) + dt * Eigen::MatrixXd(w)) * u;
  const LinearEulerStepper step(p, w, dt);
  EXPECT_LE((step(u) - dense).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LE((euler_step_linear(p, w, dt, u) - dense).cwiseAbs().maxCoeff(), 1e-13);
  const Vector half = (Eigen::MatrixXd(p) + 0.5 * dt * Eigen::MatrixXd(w)) * u;
  EXPECT_LE((step.step(u, 0.5 * dt) - half).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(SspRk3, LinearProblemsGiveCubicTaylorPolynomial) {
  const int n = 50;
  const Eigen::MatrixXd a = Eigen::MatrixXd(random_sparse(n, 1.0, 7));
  const Vector u = random_vector(n, 8);
  const double h = 0.01;
  const Vector au = a * u, a2u = a * au, a3u = a * a2u;
  const Vector taylor = u + h * au + h * h / 2 * a2u + h * h * h / 6 * a3u;
  const Vector got = ssprk3_step_rhs([&](const Vector& v) -> Vector { return a * v; }, h, u);
  EXPECT_LE((got - taylor).cwiseAbs().maxCoeff() / taylor.cwiseAbs().maxCoeff(), 1e-13);
}

TEST(SspRk3, ConvergesAtThirdOrder) {
  // u' = -u^2, u(0) = 1, u(t) = 1 / (1 + t)
  auto solve = [](int steps) {
    Vector u = Vector::Ones(1);
    const double h = 1.0 / steps;
    for (int s = 0; s < steps; ++s)
      u = ssprk3_step_rhs([](const Vector& v) -> Vector { return -v.cwiseAbs2(); }, h, u);
    return std::abs(u[0] - 0.5);
  };
  const double rate = std::log2(solve(20) / solve(40));
  EXPECT_NEAR(rate, 3.0, 0.15);
}

TEST(Divergence, NonFiniteAndLargeValuesThrow) {
  Vector u = Vector::Zero(3);
  EXPECT_NO_THROW(check_finite(u, 0));
  u[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(check_finite(u, 4), Diverged);
  u[1] = 2e6;
  try {
    check_finite(u, 7);
    FAIL();
  } catch (const Diverged& e) {
    EXPECT_EQ(e.step(), 7);
  }
}

TEST(Divergence, IntegrateReportsFailingStep) {
  SolverState s;
  s.fields = {Vector::Ones(2)};
  try {
    integrate(s, 100.0, 1.0, [](const std::vector<Vector>& f, double) {
      return std::vector<Vector>{10.0 * f[0]};
    });
    FAIL();
  } catch (const Diverged& e) {
    EXPECT_EQ(e.step(), 7);
  }
}

TEST(StepRules, Values) {
  EXPECT_DOUBLE_EQ(step_size(StepRule::diffusive(0.1), 0.1), 1e-3);
  EXPECT_DOUBLE_EQ(step_size(StepRule::advective(0.5), 0.05), 0.025);
  EXPECT_DOUBLE_EQ(step_size(StepRule::scaled_diffusive(0.1, 5e-5), 0.025), 1.25);
}

TEST(Integrate, HitsFinalTimeExactly) {
  SolverState s;
  s.fields = {Vector::Zero(1)};
  std::vector<double> steps;
  integrate(s, 1.0, 0.3, [&](const std::vector<Vector>& f, double h) {
    steps.push_back(h);
    return std::vector<Vector>{f[0] + Vector::Constant(1, h)};
  });
  ASSERT_EQ(steps.size(), 4u);
  EXPECT_EQ(s.t, 1.0);
  EXPECT_EQ(s.step, 4);
  EXPECT_NEAR(steps.back(), 0.1, 1e-15);
  EXPECT_NEAR(s.fields[0][0], 1.0, 1e-15);

  SolverState exact;
  exact.fields = {Vector::Zero(1)};
  long calls = 0;
  integrate(exact, 1.0, 0.1, [&](const std::vector<Vector>& f, double) {
    ++calls;
    return f;
  });
  EXPECT_EQ(calls, 10);
  EXPECT_EQ(exact.t, 1.0);
}

TEST(Integrate, ProgressCadence) {
  SolverState s;
  s.fields = {Vector::Zero(1)};
  std::vector<long> seen;
  integrate(
      s, 1.0, 0.1, [](const std::vector<Vector>& f, double) { return f; },
      [&](const SolverState& st) { seen.push_back(st.step); }, 3);
  EXPECT_EQ(seen, (std::vector<long>{3, 6, 9}));
}

TEST(PeronaMalik, ConstantDataHasZeroFlux) {
  const int n = 64;
  const std::vector<SparseOperator> g{{OperatorTag::d_dx, periodic_difference(n, 0.1)}};
  EXPECT_LE(perona_malik_rhs(Vector::Constant(n, 0.7), g, 1.0).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_THROW(perona_malik_rhs(Vector::Ones(n), g, 0.0), Error);
}

TEST(PeronaMalik, LargeThresholdGivesLinearDiffusion) {
  const int n = 40;
  const std::vector<SparseOperator> g{{OperatorTag::d_dx, random_sparse(n, 0.1, 9)},
                                      {OperatorTag::d_dy, random_sparse(n, 0.1, 10)}};
  const Vector u = random_vector(n, 11);
  Vector linear = Vector::Zero(n);
  for (const auto& gi : g) linear += gi.matrix * Vector(gi.matrix * u);
  EXPECT_LE((perona_malik_rhs(u, g, 1e12) - linear).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PeronaMalik, FluxIsDampedAcrossSteepEdges) {
  const int n = 64;
  const std::vector<SparseOperator> g{{OperatorTag::d_dx, periodic_difference(n, 0.1)}};
  Vector u(n);
  for (int i = 0; i < n; ++i) u[i] = i < n / 2 ? 0.0 : 1.0;
  const double strong = perona_malik_rhs(u, g, 0.1).cwiseAbs().maxCoeff();
  const double weak = perona_malik_rhs(u, g, 100.0).cwiseAbs().maxCoeff();
  EXPECT_LT(strong, 0.1 * weak);
}

TEST(GrayScott, HomogeneousStateIsSteady) {
  const int n = 10;
  SparseMatrix p(n, n), w(n, n);
  p.setIdentity();
  const auto [ru, rv] = gray_scott_rhs(Vector::Ones(n), Vector::Zero(n), p, w, GrayScottParams{});
  EXPECT_EQ(ru.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(rv.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GrayScott, ReactionTerms) {
  SparseMatrix p(1, 1), w(1, 1);
  p.setIdentity();
  const GrayScottParams prm{0.03, 0.062, 5e-5, 2.5e-5};
  const auto [ru, rv] = gray_scott_rhs(Vector::Constant(1, 0.5), Vector::Constant(1, 0.25), p, w, prm);
  const double uvv = 0.5 * 0.25 * 0.25;
  EXPECT_DOUBLE_EQ(ru[0], 0.03 * 0.5 - uvv);
  EXPECT_DOUBLE_EQ(rv[0], -(0.092) * 0.25 + uvv);
}
