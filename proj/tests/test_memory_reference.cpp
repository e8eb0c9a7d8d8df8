#include <cmath>

#include <gtest/gtest.h>

#include "memcem/memory_reference.hpp"
#include "test_util.hpp"

using namespace memcem;

namespace {

FineOperators operators(const GridHierarchy& g, double kappa, double beta, Velocity a, Velocity a_tilde) {
  KernelSpec k;
  k.terms.push_back({constant_field(g, kappa), beta});
  return assemble_fine_operators(g, k, a, a_tilde);
}

} // namespace

TEST(MemoryReference, TrajectoryFoot) {
  const auto f = trajectory_foot({0.5, 0.5}, 0.05, 0.0, {0.05, 0.0});
  EXPECT_DOUBLE_EQ(f.point[0], 0.4975);
  EXPECT_DOUBLE_EQ(f.point[1], 0.5);
  EXPECT_FALSE(f.outside);
  EXPECT_TRUE(trajectory_foot({0.01, 0.5}, 1.0, 0.0, {0.05, 0.0}).outside);
  EXPECT_TRUE(trajectory_foot({0.5, 0.99}, 1.0, 0.5, {0.0, -0.1}).outside);
  EXPECT_FALSE(trajectory_foot({0.0, 0.0}, 1.0, 1.0, {0.05, 0.0}).outside);
  EXPECT_THROW(trajectory_foot({0.5, 0.5}, 0.1, 0.2, {0.0, 0.0}), std::invalid_argument);
}

TEST(MemoryReference, BilinearInterpolationIsExactForBilinears) {
  const GridHierarchy g(3, 2);
  auto f = [](double x, double y) { return 1 + 2 * x - 3 * y + 4 * x * y; };
  const Vector u = nodal_interpolant(g, f);
  for (auto p : {std::array<double, 2>{0.13, 0.77}, {1.0, 1.0}, {0.0, 0.5}, {0.5, 1.0}, {0.999, 0.001}}) {
    FootPoint foot{p, false};
    EXPECT_NEAR(evaluate_history(g, u, foot), f(p[0], p[1]), 1e-14);
  }
  EXPECT_EQ(evaluate_history(g, u, trajectory_foot({0.0, 0.5}, 1.0, 0.0, {0.1, 0.0})), 0.0);
}

TEST(MemoryReference, ShiftedLevel) {
  const GridHierarchy g(2, 4);
  const Vector u = test::random_vector(g.num_nodes(), 1);
  EXPECT_EQ(shifted_level(g, u, 0.3, {0.0, 0.0}), u);
  // a whole fine cell to the right: node (i, j) reads node (i-1, j), zero on the inflow column
  const Vector s = shifted_level(g, u, 1.0, {g.h(), 0.0});
  for (int j = 0; j <= g.fine_n(); ++j) {
    EXPECT_EQ(s[g.node(0, j)], 0.0);
    for (int i = 1; i <= g.fine_n(); ++i) EXPECT_NEAR(s[g.node(i, j)], u[g.node(i - 1, j)], 1e-12);
  }
}

TEST(MemoryReference, MemoryVariableHandExpansion) {
  const GridHierarchy g(2, 2);
  HistoryBuffer h;
  h.levels = {test::random_vector(g.num_nodes(), 1), test::random_vector(g.num_nodes(), 2)};
  const double dt = 0.1, beta = 2.0;
  const Vector w = memory_variable(g, h, beta, dt, {0.0, 0.0});
  const Vector want = dt * std::exp(-2 * beta * dt) * h.levels[0] + dt * std::exp(-beta * dt) * h.levels[1];
  EXPECT_LT((w - want).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(memory_variable(g, HistoryBuffer{}, beta, dt, {0.0, 0.0}), std::invalid_argument);
}

TEST(MemoryReference, HistorySumConvergesToIntegral) {
  // u(t) = cos(t) times a fixed field; the sum is a left rectangle rule
  const GridHierarchy g(2, 1);
  const double beta = 1.5, t = 1.0;
  const double exact = (beta * std::cos(t) + std::sin(t) - beta * std::exp(-beta * t)) / (beta * beta + 1);
  std::vector<double> errors;
  for (int steps : {20, 40, 80}) {
    const double dt = t / steps;
    HistoryBuffer h;
    for (int k = 0; k < steps; ++k) h.levels.push_back(Vector::Constant(g.num_nodes(), std::cos(k * dt)));
    errors.push_back(std::abs(memory_variable(g, h, beta, dt, {0.0, 0.0})[0] - exact));
  }
  EXPECT_NEAR(errors[0] / errors[1], 2.0, 0.2);
  EXPECT_NEAR(errors[1] / errors[2], 2.0, 0.2);
}

TEST(MemoryReference, OneStepHandExpansion) {
  const GridHierarchy g(2, 3);
  const FineOperators fine = operators(g, 3.0, 2.0, {0.1, 0.2}, {0.0, 0.0});
  const Vector load = test::random_vector(g.num_nodes(), 5);
  const double dt = 0.01;
  const MemoryReferenceSolver solver(g, fine, {0.0, 0.0}, dt, load);
  const Vector u0 = test::random_vector(g.num_nodes(), 6);
  const Vector u1 = solver.run(u0, 1).levels.back();
  const Vector w = dt * std::exp(-2.0 * dt) * u0;
  const Matrix m = Matrix(fine.mass);
  const Vector want = m.fullPivLu().solve(Vector(m * u0 - dt * (fine.convection_u * u0) -
                                                 dt * (fine.stiffness[0] * w) + dt * load));
  EXPECT_LT((u1 - want).cwiseAbs().maxCoeff(), 1e-12 * want.cwiseAbs().maxCoeff());
}

TEST(MemoryReference, ZeroDiffusionMatchesImplicitScheme) {
  const GridHierarchy g(3, 3);
  FineOperators fine = operators(g, 1.0, 1.0, {0.2, -0.1}, {0.05, 0.0});
  fine.stiffness[0] = SparseMatrix(g.num_nodes(), g.num_nodes());
  const Vector load = test::random_vector(g.num_nodes(), 2);
  const Vector u0 = test::random_vector(g.num_nodes(), 3);
  const double dt = 5e-3;
  const DiscreteSpace space = fine_space(g, BoundaryKind::Neumann);
  const SchemeOperators ops = project_operators(fine, space, space, load);
  const ImplicitScheme scheme(ops, dt);
  const MemoryReferenceSolver direct(g, fine, {0.05, 0.0}, dt, load);
  const HistoryBuffer h = direct.run(u0, 10);
  CoupledState s = init_state(u0, ops);
  for (int n = 1; n <= 10; ++n) {
    s = scheme.step(s);
    ASSERT_LT((s.u - h.levels[n]).cwiseAbs().maxCoeff(), 1e-12 * h.levels[n].cwiseAbs().maxCoeff()) << n;
  }
}

TEST(MemoryReference, SolverRejectsBadInput) {
  const GridHierarchy g(2, 2);
  const FineOperators fine = operators(g, 1.0, 1.0, {0, 0}, {0, 0});
  EXPECT_THROW(MemoryReferenceSolver(g, fine, {0, 0}, 0.0), std::invalid_argument);
  EXPECT_THROW(MemoryReferenceSolver(GridHierarchy(2, 3), fine, {0, 0}, 0.1), std::invalid_argument);
  const MemoryReferenceSolver s(g, fine, {0, 0}, 0.1);
  EXPECT_THROW(s.run(Vector::Zero(g.num_nodes()), -1), std::invalid_argument);
}

TEST(MemoryReference, DememorizedGapIsFirstOrder) {
  MemoryCheckConfig cfg;
  cfg.coarse_n = 4;
  cfg.refine = 2;
  cfg.final_time = 0.1;
  const auto rows = compare_dememorized(cfg, {0.01, 0.005, 0.0025});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].steps, 10);
  EXPECT_TRUE(std::isnan(rows[0].ratio));
  for (int k = 1; k < 3; ++k) {
    EXPECT_GT(rows[k].ratio, 1.6);
    EXPECT_LT(rows[k].ratio, 2.4);
  }
  EXPECT_THROW(compare_dememorized(cfg, {0.03}), std::invalid_argument);
}
