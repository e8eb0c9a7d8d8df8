#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "memcem/grid.hpp"

namespace memcem {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Velocity = std::array<double, 2>;
using ScalarFunction = std::function<double(double, double)>;

// Bilinear forms on the fine Q1 space. Coefficients are cellwise constant and
// every cell integral uses 2x2 Gauss quadrature, which is exact for these forms.

/// (w u, v) with a positive per-cell weight.
SparseMatrix assemble_mass(const GridHierarchy& grid, std::span<const double> cell_weight);
/// Unweighted L2 inner product.
SparseMatrix assemble_mass(const GridHierarchy& grid);
/// (kappa grad u, grad v).
SparseMatrix assemble_stiffness(const GridHierarchy& grid, std::span<const double> kappa);
/// C[p][q] = (velocity . grad phi_q, phi_p) for a constant velocity.
SparseMatrix assemble_convection(const GridHierarchy& grid, const Velocity& velocity);

/// Single-cell reference matrices on a square of side h (local CCW order).
Eigen::Matrix4d element_mass(double h, double weight = 1.0);
Eigen::Matrix4d element_stiffness(double h, double kappa = 1.0);
Eigen::Matrix4d element_convection(double h, const Velocity& velocity);

/// Load vector (f, phi_p) by 3x3 Gauss per cell.
Vector load_vector(const GridHierarchy& grid, const ScalarFunction& f);
/// Nodal values f(x_p).
Vector nodal_interpolant(const GridHierarchy& grid, const ScalarFunction& f);

enum class BoundaryKind { Neumann, Dirichlet };

struct BoundaryCondition {
  BoundaryKind u = BoundaryKind::Neumann;
  BoundaryKind v = BoundaryKind::Neumann;
};

/// Elimination of homogeneous Dirichlet nodes. For Neumann the restriction
/// keeps every node and all maps are identities.
class DofRestriction {
public:
  DofRestriction(const GridHierarchy& grid, BoundaryKind kind);

  int full_size() const { return full_size_; }
  int size() const { return static_cast<int>(free_.size()); }
  std::span<const int> free_dofs() const { return free_; }

  SparseMatrix restrict_operator(const SparseMatrix& op) const;
  Vector restrict_vector(const Vector& full) const;
  /// Reinserts zeros on eliminated nodes.
  Vector prolong(const Vector& reduced) const;
  /// full_size x size embedding matrix.
  SparseMatrix embedding() const;

private:
  int full_size_;
  std::vector<int> free_;
};

/// op(rows, cols) as a new sparse matrix.
SparseMatrix extract_submatrix(const SparseMatrix& op, std::span<const int> rows, std::span<const int> cols);
/// op(rows, cols) as a dense matrix.
Matrix extract_dense(const SparseMatrix& op, std::span<const int> rows, std::span<const int> cols);

} // namespace memcem
