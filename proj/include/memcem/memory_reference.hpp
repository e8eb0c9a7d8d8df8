#pragma once

#include <array>
#include <vector>

#include "memcem/assembly.hpp"
#include "memcem/grid.hpp"
#include "memcem/solver.hpp"

namespace memcem {

// Direct discretization of the equation with memory: the history integral is
// summed over every stored level, sampling each level at the upstream foot
// point of the a-tilde trajectory. Work grows quadratically with the number of
// steps, so this is only meant for small verification runs.

struct FootPoint {
  std::array<double, 2> point{};
  bool outside = false;  ///< foot left the closed unit square
};

/// x - (t - s) a_tilde. Throws for s > t.
FootPoint trajectory_foot(const std::array<double, 2>& x, double t, double s, const Velocity& a_tilde);

/// Bilinear interpolation of fine nodal values; zero outside the domain.
double evaluate_history(const GridHierarchy& grid, const Vector& u, const FootPoint& foot);

/// Fine nodal u at levels 0..n.
struct HistoryBuffer {
  std::vector<Vector> levels;

  int last() const { return static_cast<int>(levels.size()) - 1; }
};

/// u^k sampled at the foot points of every fine node for a lag of `lag`.
Vector shifted_level(const GridHierarchy& grid, const Vector& u, double lag, const Velocity& a_tilde);

/// Left-rectangle history sum sum_k dt exp(-beta (t^{n+1} - t^k)) u^k(x~),
/// k = 0..n, evaluated at t^{n+1} with n the last stored level.
Vector memory_variable(const GridHierarchy& grid, const HistoryBuffer& history, double beta, double dt,
                       const Velocity& a_tilde);

/// Forward stepping of M (u^{n+1} - u^n)/dt + C_a u^n + sum_i A_i w_i = g0
/// with w_i the history sums. Stiffness matrices in `ops` may be zero.
class MemoryReferenceSolver {
public:
  MemoryReferenceSolver(const GridHierarchy& grid, const FineOperators& ops, const Velocity& a_tilde, double dt,
                        Vector source_load = {});
  Vector step(const HistoryBuffer& history) const;
  /// History of `steps` levels after u0.
  HistoryBuffer run(const Vector& u0, int steps) const;
  double dt() const { return dt_; }

private:
  const GridHierarchy& grid_;
  const FineOperators& ops_;
  Velocity a_tilde_;
  double dt_;
  Vector source_;
  LinearSolver mass_;
};

struct MemoryCheckConfig {
  int coarse_n = 4;
  int refine = 5;
  double kappa = 1.0;
  double beta = 1.0;
  Velocity a{0.0, 0.0};
  Velocity a_tilde{0.0, 0.0};
  double final_time = 0.2;
};

struct MemoryCheckRow {
  double dt = 0.0;
  int steps = 0;
  double gap = 0.0;    ///< terminal relative L2 difference
  double ratio = 0.0;  ///< gap of the previous row over this gap; NaN for the first row
};

/// Terminal gaps between the direct memory solution and the dememorized fine
/// implicit solution, u0 = sin(pi x) sin(pi y), Neumann boundary.
std::vector<MemoryCheckRow> compare_dememorized(const MemoryCheckConfig& config, const std::vector<double>& dts);

} // namespace memcem
