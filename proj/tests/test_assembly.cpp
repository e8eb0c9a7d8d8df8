#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/SparseCholesky>
#include <gtest/gtest.h>

#include "memcem/assembly.hpp"
#include "memcem/fields.hpp"
#include "test_util.hpp"

using namespace memcem;

namespace {

// local node a of the CCW cell: (0,0), (1,0), (1,1), (0,1)
double hat(int a, double x, double y) {
  const double xa = (a == 1 || a == 2) ? x : 1 - x;
  const double ya = (a >= 2) ? y : 1 - y;
  return xa * ya;
}
double hat_dx(int a, double y) { return ((a == 1 || a == 2) ? 1 : -1) * ((a >= 2) ? y : 1 - y); }
double hat_dy(int a, double x) { return ((a >= 2) ? 1 : -1) * ((a == 1 || a == 2) ? x : 1 - x); }

// Tensor Simpson rule on the unit square, exact for biquadratics.
template <class F>
double simpson(F f) {
  const double w[3] = {1.0 / 6, 4.0 / 6, 1.0 / 6};
  double s = 0.0;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) s += w[i] * w[j] * f(0.5 * i, 0.5 * j);
  return s;
}

} // namespace

TEST(Assembly, ElementMassClosedForm) {
  const double h = 0.25;
  const Eigen::Matrix4d m = element_mass(h, 2.0);
  Eigen::Matrix4d ref;
  ref << 4, 2, 1, 2, 2, 4, 2, 1, 1, 2, 4, 2, 2, 1, 2, 4;
  ref *= 2.0 * h * h / 36.0;
  EXPECT_LT((m - ref).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Assembly, ElementStiffnessClosedForm) {
  const Eigen::Matrix4d k = element_stiffness(0.1, 3.0);
  Eigen::Matrix4d ref;
  ref << 4, -1, -2, -1, -1, 4, -1, -2, -2, -1, 4, -1, -1, -2, -1, 4;
  ref *= 3.0 / 6.0;
  EXPECT_LT((k - ref).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Assembly, ElementConvectionMatchesSimpson) {
  const double h = 0.2;
  const Velocity b{0.3, -0.7};
  const Eigen::Matrix4d c = element_convection(h, b);
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) {
      // on the reference square grad scales by 1/h and the area by h^2
      const double ref = h * simpson([&](double x, double y) {
                           return (b[0] * hat_dx(q, y) + b[1] * hat_dy(q, x)) * hat(p, x, y);
                         });
      EXPECT_NEAR(c(p, q), ref, 1e-15) << p << "," << q;
    }
}

TEST(Assembly, GlobalMassAndStiffnessInvariants) {
  const GridHierarchy g(3, 4);
  const auto kappa = test::random_field(g, 1e4, 7);
  const SparseMatrix m = assemble_mass(g);
  const SparseMatrix a = assemble_stiffness(g, kappa.values);
  const Vector ones = Vector::Ones(g.num_nodes());
  EXPECT_NEAR(ones.dot(m * ones), 1.0, 1e-13);
  EXPECT_LT((a * ones).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(Matrix(a - SparseMatrix(a.transpose())).cwiseAbs().maxCoeff(), 1e-12);
  const Vector x = test::random_vector(g.num_nodes(), 3);
  EXPECT_GE(x.dot(a * x), 0.0);
  EXPECT_GT(x.dot(m * x), 0.0);
}

TEST(Assembly, WeightedMassRejectsBadWeights) {
  const GridHierarchy g(2, 2);
  std::vector<double> w(g.num_cells(), 1.0);
  w[3] = 0.0;
  EXPECT_THROW(assemble_mass(g, w), std::invalid_argument);
  w[3] = std::nan("");
  EXPECT_THROW(assemble_stiffness(g, w), std::invalid_argument);
  EXPECT_THROW(assemble_mass(g, std::vector<double>(3, 1.0)), std::invalid_argument);
}

TEST(Assembly, ConvectionAnnihilatesConstantsAndIsSkewInside) {
  const GridHierarchy g(3, 3);
  const SparseMatrix c = assemble_convection(g, {0.1, 0.05});
  const Vector ones = Vector::Ones(g.num_nodes());
  EXPECT_LT((c * ones).cwiseAbs().maxCoeff(), 1e-15);
  const Matrix sym = Matrix(c) + Matrix(c).transpose();
  for (int p = 0; p < g.num_nodes(); ++p)
    for (int q = 0; q < g.num_nodes(); ++q)
      if (!g.is_boundary_node(p) || !g.is_boundary_node(q)) EXPECT_NEAR(sym(p, q), 0.0, 1e-15);
}

TEST(Assembly, LoadVectorIntegratesPolynomials) {
  const GridHierarchy g(2, 3);
  const Vector one = load_vector(g, [](double, double) { return 1.0; });
  EXPECT_NEAR(one.sum(), 1.0, 1e-14);
  const Vector x2 = load_vector(g, [](double x, double y) { return x * x * y; });
  EXPECT_NEAR(x2.sum(), 1.0 / 6.0, 1e-14);
  const Vector f = nodal_interpolant(g, [](double x, double y) { return x + 2 * y; });
  const auto p = g.node_coords(17);
  EXPECT_DOUBLE_EQ(f[17], p[0] + 2 * p[1]);
}

TEST(Assembly, DirichletPoissonConvergesSecondOrder) {
  const double pi = std::numbers::pi;
  auto exact = [pi](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
  auto rhs = [pi, exact](double x, double y) { return 2 * pi * pi * exact(x, y); };
  std::vector<double> errors;
  for (int refine : {2, 4, 8}) {
    const GridHierarchy g(4, refine);
    const DofRestriction r(g, BoundaryKind::Dirichlet);
    const SparseMatrix a = r.restrict_operator(assemble_stiffness(g, std::vector<double>(g.num_cells(), 1.0)));
    const Vector b = r.restrict_vector(load_vector(g, rhs));
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(a);
    const Vector u = r.prolong(ldlt.solve(b));
    const Vector e = u - nodal_interpolant(g, exact);
    const SparseMatrix m = assemble_mass(g);
    errors.push_back(std::sqrt(e.dot(m * e)));
  }
  for (std::size_t k = 1; k < errors.size(); ++k) {
    const double ratio = errors[k - 1] / errors[k];
    EXPECT_GT(ratio, 3.5);
    EXPECT_LT(ratio, 4.5);
  }
}

TEST(Assembly, DofRestriction) {
  const GridHierarchy g(2, 3);
  const DofRestriction d(g, BoundaryKind::Dirichlet);
  EXPECT_EQ(d.size(), 5 * 5);
  const Vector x = test::random_vector(g.num_nodes(), 1);
  const Vector y = d.prolong(d.restrict_vector(x));
  for (int p = 0; p < g.num_nodes(); ++p) EXPECT_EQ(y[p], g.is_boundary_node(p) ? 0.0 : x[p]);
  const SparseMatrix a = assemble_stiffness(g, std::vector<double>(g.num_cells(), 1.0));
  const SparseMatrix e = d.embedding();
  EXPECT_LT(Matrix(d.restrict_operator(a) - SparseMatrix(e.transpose() * a * e)).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::SimplicialLLT<SparseMatrix> llt(d.restrict_operator(a));
  EXPECT_EQ(llt.info(), Eigen::Success);

  const DofRestriction n(g, BoundaryKind::Neumann);
  EXPECT_EQ(n.size(), g.num_nodes());
  EXPECT_EQ(n.restrict_vector(x), x);
}

TEST(Assembly, ExtractSubmatrix) {
  const GridHierarchy g(2, 2);
  const SparseMatrix m = assemble_mass(g);
  const std::vector<int> rows{0, 4, 7}, cols{1, 4};
  const Matrix d = extract_dense(m, rows, cols);
  const Matrix s = Matrix(extract_submatrix(m, rows, cols));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      EXPECT_EQ(d(i, j), m.coeff(rows[i], cols[j]));
      EXPECT_EQ(s(i, j), d(i, j));
    }
}
