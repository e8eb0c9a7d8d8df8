#include "memcem/memory_reference.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace memcem {

FootPoint trajectory_foot(const std::array<double, 2>& x, double t, double s, const Velocity& a_tilde) {
  if (s > t) throw std::invalid_argument("foot point requested for s > t");
  FootPoint f;
  f.point = {x[0] - (t - s) * a_tilde[0], x[1] - (t - s) * a_tilde[1]};
  f.outside = f.point[0] < 0.0 || f.point[0] > 1.0 || f.point[1] < 0.0 || f.point[1] > 1.0;
  return f;
}

double evaluate_history(const GridHierarchy& grid, const Vector& u, const FootPoint& foot) {
  if (foot.outside) return 0.0;
  const int n = grid.fine_n();
  const double sx = foot.point[0] * n, sy = foot.point[1] * n;
  const int i = std::min(static_cast<int>(std::floor(sx)), n - 1);
  const int j = std::min(static_cast<int>(std::floor(sy)), n - 1);
  const double x = sx - i, y = sy - j;
  return (1 - x) * (1 - y) * u[grid.node(i, j)] + x * (1 - y) * u[grid.node(i + 1, j)] +
         x * y * u[grid.node(i + 1, j + 1)] + (1 - x) * y * u[grid.node(i, j + 1)];
}

Vector shifted_level(const GridHierarchy& grid, const Vector& u, double lag, const Velocity& a_tilde) {
  if (a_tilde[0] == 0.0 && a_tilde[1] == 0.0) return u;
  Vector out(grid.num_nodes());
  for (int p = 0; p < grid.num_nodes(); ++p)
    out[p] = evaluate_history(grid, u, trajectory_foot(grid.node_coords(p), lag, 0.0, a_tilde));
  return out;
}

Vector memory_variable(const GridHierarchy& grid, const HistoryBuffer& history, double beta, double dt,
                       const Velocity& a_tilde) {
  const int n = history.last();
  if (n < 0) throw std::invalid_argument("empty history");
  Vector w = Vector::Zero(grid.num_nodes());
  for (int k = 0; k <= n; ++k) {
    const double lag = (n + 1 - k) * dt;
    w += dt * std::exp(-beta * lag) * shifted_level(grid, history.levels[k], lag, a_tilde);
  }
  return w;
}

MemoryReferenceSolver::MemoryReferenceSolver(const GridHierarchy& grid, const FineOperators& ops,
                                             const Velocity& a_tilde, double dt, Vector source_load)
    : grid_(grid), ops_(ops), a_tilde_(a_tilde), dt_(dt),
      source_(source_load.size() ? std::move(source_load) : Vector::Zero(grid.num_nodes())), mass_(ops.mass) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  if (ops.mass.rows() != grid.num_nodes()) throw std::invalid_argument("operators do not match the grid");
}

Vector MemoryReferenceSolver::step(const HistoryBuffer& history) const {
  const Vector& un = history.levels.back();
  Vector rhs = ops_.mass * un - dt_ * (ops_.convection_u * un) + dt_ * source_;
  for (std::size_t i = 0; i < ops_.stiffness.size(); ++i)
    rhs -= dt_ * (ops_.stiffness[i] * memory_variable(grid_, history, ops_.betas[i], dt_, a_tilde_));
  return mass_.solve(rhs);
}

HistoryBuffer MemoryReferenceSolver::run(const Vector& u0, int steps) const {
  if (steps < 0) throw std::invalid_argument("step count must be >= 0");
  HistoryBuffer h;
  h.levels.reserve(steps + 1);
  h.levels.push_back(u0);
  for (int n = 0; n < steps; ++n) h.levels.push_back(step(h));
  return h;
}

std::vector<MemoryCheckRow> compare_dememorized(const MemoryCheckConfig& config, const std::vector<double>& dts) {
  const GridHierarchy grid = build_grids(config.coarse_n, config.refine);
  KernelSpec kernel;
  kernel.terms.push_back({constant_field(grid, config.kappa), config.beta});
  const FineOperators fine = assemble_fine_operators(grid, kernel, config.a, config.a_tilde);
  // the zero extension makes the history vanish on the inflow boundary, so v does too
  const DiscreteSpace space = fine_space(grid, BoundaryKind::Neumann);
  const DiscreteSpace w_space = fine_space_without_inflow(grid, config.a_tilde);
  const SchemeOperators ops = project_operators(fine, space, w_space);
  const Vector u0 = nodal_interpolant(grid, [](double x, double y) {
    return std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y);
  });

  std::vector<MemoryCheckRow> rows;
  for (double dt : dts) {
    const double exact = config.final_time / dt;
    const int steps = static_cast<int>(std::lround(exact));
    if (steps < 1 || std::abs(exact - steps) > 1e-9 * exact)
      throw std::invalid_argument("time step does not divide the final time");
    const MemoryReferenceSolver direct(grid, fine, config.a_tilde, dt);
    const Vector u_direct = direct.run(u0, steps).levels.back();

    const ImplicitScheme scheme(ops, dt);
    CoupledState s = init_state(initial_coefficients(space, fine.mass, u0), ops);
    for (int n = 0; n < steps; ++n) s = scheme.step(s);

    MemoryCheckRow row;
    row.dt = dt;
    row.steps = steps;
    row.gap = relative_l2_error(s.u, space.prolongation, u_direct, fine.mass);
    row.ratio = rows.empty() ? std::numeric_limits<double>::quiet_NaN() : rows.back().gap / row.gap;
    rows.push_back(row);
  }
  return rows;
}

} // namespace memcem
