#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "memcem/assembly.hpp"
#include "memcem/cem_space.hpp"
#include "memcem/fields.hpp"
#include "memcem/grid.hpp"

namespace memcem {

/// Fine-grid operators of the dememorized system, one stiffness per kernel term.
struct FineOperators {
  SparseMatrix mass;
  std::vector<SparseMatrix> stiffness;
  std::vector<double> betas;
  SparseMatrix convection_u;  ///< velocity a
  SparseMatrix convection_v;  ///< velocity a-tilde
};

FineOperators assemble_fine_operators(const GridHierarchy& grid, const KernelSpec& kernel, const Velocity& a,
                                      const Velocity& a_tilde);

/// Ansatz space given by its prolongation to fine nodal values. `split`
/// columns form the implicit block of a split space; unsplit spaces have
/// split == dim().
struct DiscreteSpace {
  std::string name;
  SparseMatrix prolongation;
  int split = 0;
  bool nodal = false;  ///< columns are fine hat functions

  int dim() const { return static_cast<int>(prolongation.cols()); }
  bool is_split() const { return split < dim(); }
};

DiscreteSpace fine_space(const GridHierarchy& grid, BoundaryKind kind);
/// Fine hat functions except those of inflow boundary nodes (a_tilde . n < 0
/// on an adjacent side), i.e. the fine space vanishing on the inflow boundary.
DiscreteSpace fine_space_without_inflow(const GridHierarchy& grid, const Velocity& a_tilde);
/// Span of V1 only.
DiscreteSpace implicit_cem_space(const SpaceDecomposition& dec);
/// V1 + V2 with the split recorded.
DiscreteSpace full_cem_space(const SpaceDecomposition& dec);
/// Adds fine hat functions of boundary nodes where a_tilde . n < 0.
DiscreteSpace augment_with_inflow(const DiscreteSpace& space, const GridHierarchy& grid, const Velocity& a_tilde);

/// Galerkin operators in space coordinates. u lives in the V space, every v_i in the W space.
struct SchemeOperators {
  SparseMatrix mass_u;                    ///< V x V
  SparseMatrix mass_v;                    ///< W x W
  SparseMatrix mass_vu;                   ///< W x V, (u, phi)
  std::vector<SparseMatrix> stiffness_uv; ///< V x W, A_i(v, psi)
  std::vector<SparseMatrix> stiffness_v;  ///< W x W, energy of v_i
  SparseMatrix convection_u;              ///< V x V
  SparseMatrix convection_v;              ///< W x W
  std::vector<double> betas;
  Vector source;                          ///< (g0, psi), zero when absent
  int split_u = 0;                        ///< implicit block size of V
  int split_v = 0;                        ///< implicit block size of W

  int dim_u() const { return static_cast<int>(mass_u.rows()); }
  int dim_v() const { return static_cast<int>(mass_v.rows()); }
  int kernels() const { return static_cast<int>(betas.size()); }
};

/// `fine_source_load` is the fine load vector (g0, phi_p) or empty.
SchemeOperators project_operators(const FineOperators& fine, const DiscreteSpace& u_space,
                                  const DiscreteSpace& v_space, const Vector& fine_source_load = {});

/// Operators of the span of the first `n` columns of both spaces, cut from
/// already projected ones. The result is unsplit.
SchemeOperators leading_block(const SchemeOperators& ops, int n);

/// Unknowns at one time level.
struct CoupledState {
  int step = 0;
  double time = 0.0;
  Vector u;
  std::vector<Vector> v;
};

/// Coefficients of the initial condition: nodal restriction in nodal spaces,
/// L2 projection otherwise.
Vector initial_coefficients(const DiscreteSpace& space, const SparseMatrix& fine_mass, const Vector& u0_nodal);
CoupledState init_state(const Vector& u0_coefficients, const SchemeOperators& ops);

struct Energies {
  double energy = 0.0;        ///< |u|^2 + sum_i |v_i|_{A_i}^2
  double split_energy = 0.0;  ///< |u|^2 + |v_1|_A^2 + |v_2|_A^2 over the split blocks of v
};

Energies energy(const CoupledState& state, const SchemeOperators& ops);

enum class SchemeKind { Implicit, PartiallyExplicit };

struct SchemeConfig {
  SchemeKind scheme = SchemeKind::Implicit;
  double dt = 5.0e-4;
  int steps = 100;
  /// Required for the partially explicit scheme unless allow_unstable is set.
  std::optional<double> dt_bound;
  bool allow_unstable = false;
};

/// Linear solve with a factorization reused across steps. Small or dense
/// systems use dense LU, large sparse ones sparse LU.
class LinearSolver {
public:
  explicit LinearSolver(const SparseMatrix& system);
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;
  Vector solve(const Vector& rhs) const;
  bool dense() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One time-step map. `max_residual` receives the largest relative residual
/// of the scheme's defining equations for the step.
class TimeScheme {
public:
  virtual ~TimeScheme() = default;
  virtual CoupledState step(const CoupledState& state, double* max_residual = nullptr) const = 0;
  virtual double dt() const = 0;
};

/// Backward Euler with explicit convection and explicit decay of the
/// memory variables, solved monolithically for (v_1..v_M, u).
class ImplicitScheme final : public TimeScheme {
public:
  ImplicitScheme(const SchemeOperators& ops, double dt);
  CoupledState step(const CoupledState& state, double* max_residual = nullptr) const override;
  double dt() const override { return dt_; }

private:
  const SchemeOperators& ops_;
  double dt_;
  LinearSolver solver_;
};

/// Splitting scheme on V1 + V2 for a single kernel: v2 is advanced fully
/// explicitly, then (v1, u1, u2) come from one coupled solve.
class PartiallyExplicitScheme final : public TimeScheme {
public:
  /// Throws StabilityBoundError when dt exceeds `config.dt_bound` and the
  /// override is not set.
  PartiallyExplicitScheme(const SchemeOperators& ops, const SchemeConfig& config);
  CoupledState step(const CoupledState& state, double* max_residual = nullptr) const override;
  double dt() const override { return dt_; }

private:
  const SchemeOperators& ops_;
  double dt_;
  int n1_;
  int n2_;
  Matrix m11_, m12_, m21_, m22_, a11_, a12_, a21_, a22_, cv11_, cv22_;
  Eigen::PartialPivLU<Matrix> m22_lu_;
  Eigen::PartialPivLU<Matrix> coupled_lu_;
  Matrix coupled_;
};

std::unique_ptr<TimeScheme> make_scheme(const SchemeOperators& ops, const SchemeConfig& config);

struct TraceRow {
  int n = 0;
  double t = 0.0;
  double energy = 0.0;
  double split_energy = 0.0;
  double rel_l2_error = std::numeric_limits<double>::quiet_NaN();
  double residual = 0.0;
};

struct RunOptions {
  int steps = 0;
  int snapshot_stride = 0;  ///< 0: terminal snapshot only
  /// Fine nodal reference u for steps 0..steps; enables the error column.
  const std::vector<Vector>* reference = nullptr;
  const SparseMatrix* fine_mass = nullptr;
  bool keep_trajectory = false;
};

struct Snapshot {
  int n = 0;
  Vector fine_u;
};

struct RunResult {
  std::vector<TraceRow> trace;
  CoupledState final_state;
  std::vector<Snapshot> snapshots;
  std::vector<Vector> trajectory;  ///< fine nodal u per step when requested
  double max_residual = 0.0;
};

RunResult run(const TimeScheme& scheme, const SchemeOperators& ops, const DiscreteSpace& space,
              const CoupledState& initial, const RunOptions& options);

/// |P c - u_ref|_M / |u_ref|_M. Throws for a zero reference.
double relative_l2_error(const Vector& coefficients, const SparseMatrix& prolongation, const Vector& reference,
                         const SparseMatrix& fine_mass);

} // namespace memcem
