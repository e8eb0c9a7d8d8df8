#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace memcem {

/// Nested structured grids on the unit square.
///
/// The coarse grid has `coarse_n` square elements per side; every coarse
/// element is split into `refine` x `refine` fine cells, so the fine grid has
/// `fine_n = coarse_n * refine` cells per side and (fine_n + 1)^2 Q1 nodes.
///
/// Numbering is lexicographic with x fastest:
///   fine node  (i, j) -> j * (fine_n + 1) + i,   0 <= i, j <= fine_n
///   fine cell  (i, j) -> j * fine_n + i,         0 <= i, j <  fine_n
///   coarse el. (I, J) -> J * coarse_n + I
///   coarse node(I, J) -> J * (coarse_n + 1) + I
/// Local cell node order is counter-clockwise starting at the lower-left.
class GridHierarchy {
public:
  GridHierarchy(int coarse_n, int refine);

  int coarse_n() const { return coarse_n_; }
  int refine() const { return refine_; }
  int fine_n() const { return fine_n_; }

  /// Side length of a fine cell. The element diagonal is sqrt(2) * h().
  double h() const { return 1.0 / fine_n_; }
  /// Side length of a coarse element.
  double coarse_h() const { return 1.0 / coarse_n_; }

  int num_nodes() const { return (fine_n_ + 1) * (fine_n_ + 1); }
  int num_cells() const { return fine_n_ * fine_n_; }
  int num_coarse_elements() const { return coarse_n_ * coarse_n_; }
  int num_coarse_nodes() const { return (coarse_n_ + 1) * (coarse_n_ + 1); }

  int node(int i, int j) const { return j * (fine_n_ + 1) + i; }
  int cell(int i, int j) const { return j * fine_n_ + i; }
  std::array<double, 2> node_coords(int node) const;
  std::array<double, 2> cell_center(int cell) const;
  std::array<int, 4> cell_nodes(int cell) const;
  int coarse_element_of_cell(int cell) const;

  /// Fine nodes in the closed coarse element, sorted ascending.
  std::span<const int> coarse_element_nodes(int element) const;
  /// Fine nodes strictly inside the coarse element, sorted ascending.
  std::span<const int> coarse_element_interior_nodes(int element) const;
  /// Fine cells of the coarse element, sorted ascending.
  std::span<const int> coarse_element_cells(int element) const;

  bool is_boundary_node(int node) const;
  /// Bit mask of boundary sides a node touches: 1 left, 2 right, 4 bottom, 8 top.
  unsigned boundary_sides(int node) const;

  /// Fine cells containing the node (between 1 and 4).
  std::vector<int> cells_of_node(int node) const;

private:
  int coarse_n_;
  int refine_;
  int fine_n_;
  std::vector<std::vector<int>> element_nodes_;
  std::vector<std::vector<int>> element_interior_nodes_;
  std::vector<std::vector<int>> element_cells_;
};

/// Checked construction; rejects coarse_n < 2, refine < 1 and grids whose
/// node count would not fit the index type.
GridHierarchy build_grids(int coarse_n, int refine);

/// Fine nodes interior to the union of coarse elements [i0, i1] x [j0, j1]
/// (inclusive coarse index ranges). Nodes on the rectangle boundary,
/// including any part of the domain boundary, are excluded.
std::vector<int> patch_interior_nodes(const GridHierarchy& grid, int i0, int i1, int j0, int j1);

} // namespace memcem
