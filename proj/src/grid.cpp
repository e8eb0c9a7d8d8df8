#include "memcem/grid.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace memcem {

GridHierarchy::GridHierarchy(int coarse_n, int refine)
    : coarse_n_(coarse_n), refine_(refine), fine_n_(0) {
  if (coarse_n < 2)
    throw std::invalid_argument("coarse_n must be >= 2, got " + std::to_string(coarse_n));
  if (refine < 1)
    throw std::invalid_argument("refine must be >= 1, got " + std::to_string(refine));
  const std::int64_t fine = std::int64_t{coarse_n} * refine;
  const std::int64_t nodes = (fine + 1) * (fine + 1);
  // node and triplet indices are stored as int; keep headroom for 16 entries per node
  if (nodes > std::numeric_limits<int>::max() / 16)
    throw std::invalid_argument("grid too large: " + std::to_string(fine) + " fine cells per side");
  fine_n_ = static_cast<int>(fine);

  const int ne = coarse_n_ * coarse_n_;
  element_nodes_.resize(ne);
  element_interior_nodes_.resize(ne);
  element_cells_.resize(ne);
  for (int ej = 0; ej < coarse_n_; ++ej) {
    for (int ei = 0; ei < coarse_n_; ++ei) {
      const int e = ej * coarse_n_ + ei;
      const int i0 = ei * refine_, j0 = ej * refine_;
      for (int j = j0; j <= j0 + refine_; ++j) {
        for (int i = i0; i <= i0 + refine_; ++i) {
          element_nodes_[e].push_back(node(i, j));
          if (i > i0 && i < i0 + refine_ && j > j0 && j < j0 + refine_)
            element_interior_nodes_[e].push_back(node(i, j));
        }
      }
      for (int j = j0; j < j0 + refine_; ++j)
        for (int i = i0; i < i0 + refine_; ++i)
          element_cells_[e].push_back(cell(i, j));
    }
  }
}

std::array<double, 2> GridHierarchy::node_coords(int n) const {
  const int i = n % (fine_n_ + 1);
  const int j = n / (fine_n_ + 1);
  return {static_cast<double>(i) / fine_n_, static_cast<double>(j) / fine_n_};
}

std::array<double, 2> GridHierarchy::cell_center(int c) const {
  const int i = c % fine_n_;
  const int j = c / fine_n_;
  return {(i + 0.5) / fine_n_, (j + 0.5) / fine_n_};
}

std::array<int, 4> GridHierarchy::cell_nodes(int c) const {
  const int i = c % fine_n_;
  const int j = c / fine_n_;
  return {node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)};
}

int GridHierarchy::coarse_element_of_cell(int c) const {
  const int i = c % fine_n_;
  const int j = c / fine_n_;
  return (j / refine_) * coarse_n_ + i / refine_;
}

std::span<const int> GridHierarchy::coarse_element_nodes(int e) const {
  return element_nodes_.at(e);
}

std::span<const int> GridHierarchy::coarse_element_interior_nodes(int e) const {
  return element_interior_nodes_.at(e);
}

std::span<const int> GridHierarchy::coarse_element_cells(int e) const {
  return element_cells_.at(e);
}

unsigned GridHierarchy::boundary_sides(int n) const {
  const int i = n % (fine_n_ + 1);
  const int j = n / (fine_n_ + 1);
  unsigned mask = 0;
  if (i == 0) mask |= 1u;
  if (i == fine_n_) mask |= 2u;
  if (j == 0) mask |= 4u;
  if (j == fine_n_) mask |= 8u;
  return mask;
}

bool GridHierarchy::is_boundary_node(int n) const { return boundary_sides(n) != 0; }

std::vector<int> GridHierarchy::cells_of_node(int n) const {
  const int i = n % (fine_n_ + 1);
  const int j = n / (fine_n_ + 1);
  std::vector<int> cells;
  for (int dj = -1; dj <= 0; ++dj)
    for (int di = -1; di <= 0; ++di) {
      const int ci = i + di, cj = j + dj;
      if (ci >= 0 && ci < fine_n_ && cj >= 0 && cj < fine_n_)
        cells.push_back(cell(ci, cj));
    }
  return cells;
}

GridHierarchy build_grids(int coarse_n, int refine) { return GridHierarchy(coarse_n, refine); }

std::vector<int> patch_interior_nodes(const GridHierarchy& grid, int i0, int i1, int j0, int j1) {
  const int r = grid.refine();
  const int x0 = i0 * r, x1 = (i1 + 1) * r;
  const int y0 = j0 * r, y1 = (j1 + 1) * r;
  std::vector<int> nodes;
  nodes.reserve(static_cast<std::size_t>(x1 - x0 - 1) * (y1 - y0 - 1));
  for (int j = y0 + 1; j < y1; ++j)
    for (int i = x0 + 1; i < x1; ++i)
      nodes.push_back(grid.node(i, j));
  return nodes;
}

} // namespace memcem
