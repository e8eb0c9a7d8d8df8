#include "memcem/assembly.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace memcem {

namespace {

struct QuadPoint {
  double xi, eta, weight;
};

// Gauss rules on the reference cell [0,1]^2.
std::vector<QuadPoint> gauss_rule(int n) {
  std::vector<double> x, w;
  if (n == 2) {
    const double g = 0.5 / std::sqrt(3.0);
    x = {0.5 - g, 0.5 + g};
    w = {0.5, 0.5};
  } else {
    const double g = 0.5 * std::sqrt(0.6);
    x = {0.5 - g, 0.5, 0.5 + g};
    w = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  }
  std::vector<QuadPoint> rule;
  for (std::size_t b = 0; b < x.size(); ++b)
    for (std::size_t a = 0; a < x.size(); ++a)
      rule.push_back({x[a], x[b], w[a] * w[b]});
  return rule;
}

std::array<double, 4> shape(double xi, double eta) {
  return {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
}

// Reference gradients d/dxi, d/deta.
std::array<std::array<double, 2>, 4> shape_grad(double xi, double eta) {
  return {{{-(1 - eta), -(1 - xi)}, {(1 - eta), -xi}, {eta, xi}, {-eta, 1 - xi}}};
}

void check_cell_field(const GridHierarchy& grid, std::span<const double> field, const char* what) {
  if (static_cast<int>(field.size()) != grid.num_cells())
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(grid.num_cells()) +
                                " cell values, got " + std::to_string(field.size()));
  for (std::size_t c = 0; c < field.size(); ++c)
    if (!(field[c] > 0.0) || !std::isfinite(field[c]))
      throw std::invalid_argument(std::string(what) + ": nonpositive or nonfinite value at cell " +
                                  std::to_string(c));
}

template <typename ElementFn>
SparseMatrix assemble_cells(const GridHierarchy& grid, ElementFn&& element) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(grid.num_cells()) * 16);
  for (int c = 0; c < grid.num_cells(); ++c) {
    const Eigen::Matrix4d ke = element(c);
    const auto nodes = grid.cell_nodes(c);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (ke(a, b) != 0.0) triplets.emplace_back(nodes[a], nodes[b], ke(a, b));
  }
  SparseMatrix op(grid.num_nodes(), grid.num_nodes());
  op.setFromTriplets(triplets.begin(), triplets.end());
  op.makeCompressed();
  return op;
}

} // namespace

Eigen::Matrix4d element_mass(double h, double weight) {
  Eigen::Matrix4d ke = Eigen::Matrix4d::Zero();
  for (const auto& q : gauss_rule(2)) {
    const auto phi = shape(q.xi, q.eta);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        ke(a, b) += q.weight * phi[a] * phi[b];
  }
  return ke * (weight * h * h);
}

Eigen::Matrix4d element_stiffness(double h, double kappa) {
  Eigen::Matrix4d ke = Eigen::Matrix4d::Zero();
  for (const auto& q : gauss_rule(2)) {
    const auto g = shape_grad(q.xi, q.eta);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        ke(a, b) += q.weight * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
  }
  // gradients scale with 1/h, the cell area with h^2
  (void)h;
  return ke * kappa;
}

Eigen::Matrix4d element_convection(double h, const Velocity& velocity) {
  Eigen::Matrix4d ke = Eigen::Matrix4d::Zero();
  for (const auto& q : gauss_rule(2)) {
    const auto phi = shape(q.xi, q.eta);
    const auto g = shape_grad(q.xi, q.eta);
    for (int p = 0; p < 4; ++p)
      for (int r = 0; r < 4; ++r)
        ke(p, r) += q.weight * (velocity[0] * g[r][0] + velocity[1] * g[r][1]) * phi[p];
  }
  return ke * h;
}

SparseMatrix assemble_mass(const GridHierarchy& grid, std::span<const double> cell_weight) {
  check_cell_field(grid, cell_weight, "mass weight");
  const Eigen::Matrix4d unit = element_mass(grid.h());
  return assemble_cells(grid, [&](int c) -> Eigen::Matrix4d { return unit * cell_weight[c]; });
}

SparseMatrix assemble_mass(const GridHierarchy& grid) {
  const Eigen::Matrix4d unit = element_mass(grid.h());
  return assemble_cells(grid, [&](int) -> Eigen::Matrix4d { return unit; });
}

SparseMatrix assemble_stiffness(const GridHierarchy& grid, std::span<const double> kappa) {
  check_cell_field(grid, kappa, "stiffness kappa");
  const Eigen::Matrix4d unit = element_stiffness(grid.h());
  return assemble_cells(grid, [&](int c) -> Eigen::Matrix4d { return unit * kappa[c]; });
}

SparseMatrix assemble_convection(const GridHierarchy& grid, const Velocity& velocity) {
  if (!std::isfinite(velocity[0]) || !std::isfinite(velocity[1]))
    throw std::invalid_argument("convection velocity must be finite");
  const Eigen::Matrix4d unit = element_convection(grid.h(), velocity);
  return assemble_cells(grid, [&](int) -> Eigen::Matrix4d { return unit; });
}

Vector load_vector(const GridHierarchy& grid, const ScalarFunction& f) {
  Vector load = Vector::Zero(grid.num_nodes());
  const double h = grid.h();
  const auto rule = gauss_rule(3);
  for (int c = 0; c < grid.num_cells(); ++c) {
    const auto nodes = grid.cell_nodes(c);
    const auto x0 = grid.node_coords(nodes[0]);
    for (const auto& q : rule) {
      const double fv = f(x0[0] + q.xi * h, x0[1] + q.eta * h);
      const auto phi = shape(q.xi, q.eta);
      for (int a = 0; a < 4; ++a)
        load[nodes[a]] += q.weight * h * h * fv * phi[a];
    }
  }
  return load;
}

Vector nodal_interpolant(const GridHierarchy& grid, const ScalarFunction& f) {
  Vector u(grid.num_nodes());
  for (int p = 0; p < grid.num_nodes(); ++p) {
    const auto x = grid.node_coords(p);
    u[p] = f(x[0], x[1]);
  }
  return u;
}

DofRestriction::DofRestriction(const GridHierarchy& grid, BoundaryKind kind)
    : full_size_(grid.num_nodes()) {
  for (int p = 0; p < grid.num_nodes(); ++p)
    if (kind == BoundaryKind::Neumann || !grid.is_boundary_node(p)) free_.push_back(p);
}

SparseMatrix DofRestriction::restrict_operator(const SparseMatrix& op) const {
  if (size() == full_size_) return op;
  return extract_submatrix(op, free_, free_);
}

Vector DofRestriction::restrict_vector(const Vector& full) const {
  Vector r(size());
  for (int k = 0; k < size(); ++k) r[k] = full[free_[k]];
  return r;
}

Vector DofRestriction::prolong(const Vector& reduced) const {
  Vector full = Vector::Zero(full_size_);
  for (int k = 0; k < size(); ++k) full[free_[k]] = reduced[k];
  return full;
}

SparseMatrix DofRestriction::embedding() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(free_.size());
  for (int k = 0; k < size(); ++k) t.emplace_back(free_[k], k, 1.0);
  SparseMatrix e(full_size_, size());
  e.setFromTriplets(t.begin(), t.end());
  return e;
}

SparseMatrix extract_submatrix(const SparseMatrix& op, std::span<const int> rows, std::span<const int> cols) {
  std::vector<int> row_map(op.rows(), -1);
  for (std::size_t k = 0; k < rows.size(); ++k) row_map[rows[k]] = static_cast<int>(k);
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t k = 0; k < cols.size(); ++k)
    for (SparseMatrix::InnerIterator it(op, cols[k]); it; ++it)
      if (row_map[it.row()] >= 0) t.emplace_back(row_map[it.row()], static_cast<int>(k), it.value());
  SparseMatrix sub(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  sub.setFromTriplets(t.begin(), t.end());
  sub.makeCompressed();
  return sub;
}

Matrix extract_dense(const SparseMatrix& op, std::span<const int> rows, std::span<const int> cols) {
  std::vector<int> row_map(op.rows(), -1);
  for (std::size_t k = 0; k < rows.size(); ++k) row_map[rows[k]] = static_cast<int>(k);
  Matrix sub = Matrix::Zero(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k)
    for (SparseMatrix::InnerIterator it(op, cols[k]); it; ++it)
      if (row_map[it.row()] >= 0) sub(row_map[it.row()], static_cast<int>(k)) = it.value();
  return sub;
}

} // namespace memcem
