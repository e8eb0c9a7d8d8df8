#include "memcem/solver.hpp"

#include <cmath>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <variant>

#include <Eigen/SparseLU>

#include "memcem/errors.hpp"

namespace memcem {

FineOperators assemble_fine_operators(const GridHierarchy& grid, const KernelSpec& kernel, const Velocity& a,
                                      const Velocity& a_tilde) {
  kernel.validate();
  FineOperators ops;
  ops.mass = assemble_mass(grid);
  for (const auto& term : kernel.terms) {
    term.kappa.check_matches(grid);
    ops.stiffness.push_back(assemble_stiffness(grid, term.kappa.values));
    ops.betas.push_back(term.beta);
  }
  ops.convection_u = assemble_convection(grid, a);
  ops.convection_v = assemble_convection(grid, a_tilde);
  return ops;
}

DiscreteSpace fine_space(const GridHierarchy& grid, BoundaryKind kind) {
  DofRestriction r(grid, kind);
  DiscreteSpace s;
  s.name = kind == BoundaryKind::Neumann ? "fine" : "fine-dirichlet";
  s.prolongation = r.embedding();
  s.split = s.dim();
  s.nodal = true;
  return s;
}

namespace {

bool on_inflow(const GridHierarchy& grid, int node, const Velocity& a_tilde) {
  const unsigned sides = grid.boundary_sides(node);
  // outward normals: left (-1,0), right (1,0), bottom (0,-1), top (0,1)
  return ((sides & 1u) && -a_tilde[0] < 0) || ((sides & 2u) && a_tilde[0] < 0) || ((sides & 4u) && -a_tilde[1] < 0) ||
         ((sides & 8u) && a_tilde[1] < 0);
}

} // namespace

DiscreteSpace fine_space_without_inflow(const GridHierarchy& grid, const Velocity& a_tilde) {
  std::vector<Eigen::Triplet<double>> t;
  int col = 0;
  for (int node = 0; node < grid.num_nodes(); ++node)
    if (!on_inflow(grid, node, a_tilde)) t.emplace_back(node, col++, 1.0);
  DiscreteSpace s;
  s.name = "fine-inflow-free";
  s.prolongation.resize(grid.num_nodes(), col);
  s.prolongation.setFromTriplets(t.begin(), t.end());
  s.split = col;
  s.nodal = true;
  return s;
}

DiscreteSpace implicit_cem_space(const SpaceDecomposition& dec) {
  DiscreteSpace s;
  s.name = "cem-v1";
  s.prolongation = dec.basis_v1;
  s.split = s.dim();
  return s;
}

DiscreteSpace full_cem_space(const SpaceDecomposition& dec) {
  DiscreteSpace s;
  s.name = "cem-v1+v2";
  s.prolongation = dec.combined();
  s.split = dec.dim_v1();
  return s;
}

DiscreteSpace augment_with_inflow(const DiscreteSpace& space, const GridHierarchy& grid, const Velocity& a_tilde) {
  std::vector<Eigen::Triplet<double>> t;
  const SparseMatrix& p = space.prolongation;
  for (int k = 0; k < p.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(p, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  int col = space.dim();
  for (int node = 0; node < grid.num_nodes(); ++node)
    if (on_inflow(grid, node, a_tilde)) t.emplace_back(node, col++, 1.0);
  DiscreteSpace out;
  out.name = space.name + "+inflow";
  out.prolongation.resize(p.rows(), col);
  out.prolongation.setFromTriplets(t.begin(), t.end());
  out.split = col;
  return out;
}

namespace {

bool is_identity_embedding(const DiscreteSpace& s) { return s.nodal && s.prolongation.rows() == s.prolongation.cols(); }

SparseMatrix galerkin(const DiscreteSpace& left, const SparseMatrix& op, const DiscreteSpace& right) {
  if (is_identity_embedding(left) && is_identity_embedding(right)) return op;
  if (left.nodal && right.nodal) {
    const SparseMatrix r = op * right.prolongation;
    return SparseMatrix(left.prolongation.transpose() * r);
  }
  const Matrix r = op * right.prolongation;
  const Matrix g = left.prolongation.transpose() * r;
  return g.sparseView(0.0, 0.0);
}

double inf_norm(const Vector& x) { return x.size() ? x.cwiseAbs().maxCoeff() : 0.0; }

// A term c * op * x of a discrete equation with its floating-point scale |c| |op| |x|.
struct Term {
  Vector value;
  Vector magnitude;

  Term head(int n) const { return {value.head(n), magnitude.head(n)}; }
  Term tail(int n) const { return {value.tail(n), magnitude.tail(n)}; }
};

template <class Op>
Term term(const Op& op, const Vector& x, double c) {
  return {c * (op * x), std::abs(c) * (op.cwiseAbs() * x.cwiseAbs())};
}

Term vector_term(const Vector& b, double c) { return {c * b, std::abs(c) * b.cwiseAbs()}; }

// Normwise backward error |sum of terms| / | sum of term magnitudes |, max norm
double relative_residual(std::initializer_list<Term> terms) {
  Vector sum, scale;
  for (const auto& t : terms) {
    if (sum.size() == 0) {
      sum = t.value;
      scale = t.magnitude;
    } else {
      sum += t.value;
      scale += t.magnitude;
    }
  }
  const double s = inf_norm(scale);
  return s > 0.0 ? inf_norm(sum) / s : 0.0;
}

} // namespace

SchemeOperators project_operators(const FineOperators& fine, const DiscreteSpace& u_space,
                                  const DiscreteSpace& v_space, const Vector& fine_source_load) {
  SchemeOperators ops;
  ops.mass_u = galerkin(u_space, fine.mass, u_space);
  ops.mass_v = galerkin(v_space, fine.mass, v_space);
  ops.mass_vu = galerkin(v_space, fine.mass, u_space);
  for (const auto& a : fine.stiffness) {
    ops.stiffness_uv.push_back(galerkin(u_space, a, v_space));
    ops.stiffness_v.push_back(galerkin(v_space, a, v_space));
  }
  ops.convection_u = galerkin(u_space, fine.convection_u, u_space);
  ops.convection_v = galerkin(v_space, fine.convection_v, v_space);
  ops.betas = fine.betas;
  ops.source = fine_source_load.size() ? Vector(u_space.prolongation.transpose() * fine_source_load)
                                       : Vector::Zero(u_space.dim());
  ops.split_u = u_space.split;
  ops.split_v = v_space.split;
  return ops;
}

SchemeOperators leading_block(const SchemeOperators& ops, int n) {
  if (n < 0 || n > ops.dim_u() || n > ops.dim_v()) throw std::invalid_argument("leading block exceeds the space");
  auto cut = [n](const SparseMatrix& m) { return SparseMatrix(m.topLeftCorner(n, n)); };
  SchemeOperators out;
  out.mass_u = cut(ops.mass_u);
  out.mass_v = cut(ops.mass_v);
  out.mass_vu = cut(ops.mass_vu);
  for (const auto& a : ops.stiffness_uv) out.stiffness_uv.push_back(cut(a));
  for (const auto& a : ops.stiffness_v) out.stiffness_v.push_back(cut(a));
  out.convection_u = cut(ops.convection_u);
  out.convection_v = cut(ops.convection_v);
  out.betas = ops.betas;
  out.source = ops.source.head(n);
  out.split_u = n;
  out.split_v = n;
  return out;
}

Vector initial_coefficients(const DiscreteSpace& space, const SparseMatrix& fine_mass, const Vector& u0_nodal) {
  if (u0_nodal.size() != space.prolongation.rows())
    throw std::invalid_argument("initial condition size does not match the fine grid");
  if (space.nodal) return space.prolongation.transpose() * u0_nodal;
  const Matrix g = gram(space.prolongation, fine_mass, space.prolongation);
  const Vector rhs = space.prolongation.transpose() * (fine_mass * u0_nodal);
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success) throw NumericalError("space mass matrix is not positive definite");
  return llt.solve(rhs);
}

CoupledState init_state(const Vector& u0_coefficients, const SchemeOperators& ops) {
  if (u0_coefficients.size() != ops.dim_u())
    throw std::invalid_argument("initial coefficients have size " + std::to_string(u0_coefficients.size()) +
                                ", space has dimension " + std::to_string(ops.dim_u()));
  CoupledState s;
  s.u = u0_coefficients;
  s.v.assign(ops.kernels(), Vector::Zero(ops.dim_v()));
  return s;
}

Energies energy(const CoupledState& state, const SchemeOperators& ops) {
  Energies e;
  const double l2 = state.u.dot(ops.mass_u * state.u);
  e.energy = l2;
  e.split_energy = l2;
  const int s = ops.split_v;
  const int n2 = ops.dim_v() - s;
  for (int i = 0; i < ops.kernels(); ++i) {
    const Vector& v = state.v[i];
    e.energy += v.dot(ops.stiffness_v[i] * v);
    if (n2 == 0) {
      e.split_energy += v.dot(ops.stiffness_v[i] * v);
    } else {
      const SparseMatrix& a = ops.stiffness_v[i];
      const Vector v1 = v.head(s), v2 = v.tail(n2);
      e.split_energy += v1.dot(a.topLeftCorner(s, s) * v1) + v2.dot(a.bottomRightCorner(n2, n2) * v2);
    }
  }
  return e;
}

struct LinearSolver::Impl {
  SparseMatrix system;
  std::variant<Eigen::PartialPivLU<Matrix>, std::unique_ptr<Eigen::SparseLU<SparseMatrix>>> lu;
};

LinearSolver::LinearSolver(const SparseMatrix& system) : impl_(std::make_unique<Impl>()) {
  impl_->system = system;
  impl_->system.makeCompressed();
  const double n = static_cast<double>(system.rows());
  const double density = n > 0 ? static_cast<double>(system.nonZeros()) / (n * n) : 1.0;
  if (system.rows() <= 400 || (system.rows() <= 5000 && density > 0.02)) {
    Eigen::PartialPivLU<Matrix> dense(Matrix(impl_->system));
    const Matrix& lu = dense.matrixLU();
    for (Eigen::Index k = 0; k < lu.rows(); ++k)
      if (lu(k, k) == 0.0 || !std::isfinite(lu(k, k))) throw NumericalError("singular step operator");
    impl_->lu = std::move(dense);
  } else {
    auto sparse = std::make_unique<Eigen::SparseLU<SparseMatrix>>();
    sparse->compute(impl_->system);
    if (sparse->info() != Eigen::Success) throw NumericalError("singular step operator: " + sparse->lastErrorMessage());
    impl_->lu = std::move(sparse);
  }
}

LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

bool LinearSolver::dense() const { return impl_->lu.index() == 0; }

Vector LinearSolver::solve(const Vector& rhs) const {
  auto once = [&](const Vector& b) -> Vector {
    if (auto* d = std::get_if<0>(&impl_->lu)) return d->solve(b);
    return std::get<1>(impl_->lu)->solve(b);
  };
  Vector x = once(rhs);
  double previous = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < 4; ++sweep) {
    const Vector r = rhs - impl_->system * x;
    const double norm = r.cwiseAbs().maxCoeff();
    if (!(norm < previous) || norm == 0.0) break;
    previous = norm;
    x += once(r);
  }
  if (!x.allFinite()) throw NumericalError("linear solve produced nonfinite values");
  return x;
}

namespace {

SparseMatrix implicit_system(const SchemeOperators& ops, double dt) {
  const int nv = ops.dim_v(), nu = ops.dim_u(), nk = ops.kernels();
  const int n = nk * nv + nu;
  std::vector<Eigen::Triplet<double>> t;
  auto put = [&](const SparseMatrix& m, int r0, int c0, double scale) {
    for (int k = 0; k < m.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(m, k); it; ++it)
        t.emplace_back(r0 + static_cast<int>(it.row()), c0 + static_cast<int>(it.col()), scale * it.value());
  };
  for (int i = 0; i < nk; ++i) {
    put(ops.mass_v, i * nv, i * nv, 1.0 / dt);
    put(ops.mass_vu, i * nv, nk * nv, -1.0);
    put(ops.stiffness_uv[i], nk * nv, i * nv, 1.0);
  }
  put(ops.mass_u, nk * nv, nk * nv, 1.0 / dt);
  SparseMatrix k(n, n);
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

} // namespace

ImplicitScheme::ImplicitScheme(const SchemeOperators& ops, double dt)
    : ops_(ops), dt_(dt), solver_((dt > 0.0 && std::isfinite(dt)) ? implicit_system(ops, dt)
                                                                  : throw std::invalid_argument("dt must be positive")) {}

CoupledState ImplicitScheme::step(const CoupledState& state, double* max_residual) const {
  const int nv = ops_.dim_v(), nu = ops_.dim_u(), nk = ops_.kernels();
  Vector rhs(nk * nv + nu);
  for (int i = 0; i < nk; ++i)
    rhs.segment(i * nv, nv) =
        ops_.mass_v * state.v[i] * (1.0 / dt_ - ops_.betas[i]) - ops_.convection_v * state.v[i];
  rhs.tail(nu) = ops_.mass_u * state.u / dt_ - ops_.convection_u * state.u + ops_.source;
  const Vector x = solver_.solve(rhs);

  CoupledState next;
  next.step = state.step + 1;
  next.time = next.step * dt_;
  next.u = x.tail(nu);
  next.v.resize(nk);
  for (int i = 0; i < nk; ++i) next.v[i] = x.segment(i * nv, nv);

  if (max_residual) {
    double res = 0.0;
    std::vector<Term> diffusion;
    for (int i = 0; i < nk; ++i) {
      res = std::max(res, relative_residual({term(ops_.mass_v, next.v[i], 1.0 / dt_),
                                             term(ops_.mass_v, state.v[i], -1.0 / dt_),
                                             term(ops_.mass_v, state.v[i], ops_.betas[i]),
                                             term(ops_.convection_v, state.v[i], 1.0),
                                             term(ops_.mass_vu, next.u, -1.0)}));
      diffusion.push_back(term(ops_.stiffness_uv[i], next.v[i], 1.0));
    }
    Term diff = diffusion[0];
    for (int i = 1; i < nk; ++i) {
      diff.value += diffusion[i].value;
      diff.magnitude += diffusion[i].magnitude;
    }
    res = std::max(res, relative_residual({term(ops_.mass_u, next.u, 1.0 / dt_), term(ops_.mass_u, state.u, -1.0 / dt_),
                                           term(ops_.convection_u, state.u, 1.0), diff,
                                           vector_term(ops_.source, -1.0)}));
    *max_residual = res;
  }
  return next;
}

PartiallyExplicitScheme::PartiallyExplicitScheme(const SchemeOperators& ops, const SchemeConfig& config)
    : ops_(ops), dt_(config.dt), n1_(ops.split_u), n2_(ops.dim_u() - ops.split_u) {
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw std::invalid_argument("dt must be positive");
  if (ops.kernels() != 1) throw std::invalid_argument("the partially explicit scheme supports a single kernel term");
  if (ops.dim_u() != ops.dim_v() || ops.split_u != ops.split_v)
    throw std::invalid_argument("the partially explicit scheme needs identical split spaces for u and v");
  if (!config.allow_unstable) {
    if (!config.dt_bound) throw std::invalid_argument("partially explicit scheme needs a dt bound or the override");
    if (dt_ > *config.dt_bound) throw StabilityBoundError(dt_, *config.dt_bound);
  }
  const Matrix m = Matrix(ops.mass_u);
  const Matrix a = Matrix(ops.stiffness_uv[0]);
  const Matrix cv = Matrix(ops.convection_v);
  m11_ = m.topLeftCorner(n1_, n1_);
  m12_ = m.topRightCorner(n1_, n2_);
  m21_ = m.bottomLeftCorner(n2_, n1_);
  m22_ = m.bottomRightCorner(n2_, n2_);
  a11_ = a.topLeftCorner(n1_, n1_);
  a12_ = a.topRightCorner(n1_, n2_);
  a21_ = a.bottomLeftCorner(n2_, n1_);
  a22_ = a.bottomRightCorner(n2_, n2_);
  cv11_ = cv.topLeftCorner(n1_, n1_);
  cv22_ = cv.bottomRightCorner(n2_, n2_);
  if (n2_ > 0) m22_lu_.compute(m22_);

  // unknowns (v1, u1, u2)
  const int n = 2 * n1_ + n2_;
  coupled_ = Matrix::Zero(n, n);
  coupled_.block(0, 0, n1_, n1_) = m11_ / dt_;
  coupled_.block(0, n1_, n1_, n1_) = -m11_;
  coupled_.block(n1_, 0, n1_, n1_) = a11_;
  coupled_.block(n1_, n1_, n1_, n1_) = m11_ / dt_;
  coupled_.block(n1_, 2 * n1_, n1_, n2_) = m12_ / dt_;
  coupled_.block(2 * n1_, 0, n2_, n1_) = a21_;
  coupled_.block(2 * n1_, n1_, n2_, n1_) = m21_ / dt_;
  coupled_.block(2 * n1_, 2 * n1_, n2_, n2_) = m22_ / dt_;
  coupled_lu_.compute(coupled_);
  const Matrix& lu = coupled_lu_.matrixLU();
  for (Eigen::Index k = 0; k < lu.rows(); ++k)
    if (lu(k, k) == 0.0 || !std::isfinite(lu(k, k))) throw NumericalError("singular coupled block");
}

CoupledState PartiallyExplicitScheme::step(const CoupledState& state, double* max_residual) const {
  const double beta = ops_.betas[0];
  const Vector u1 = state.u.head(n1_), u2 = state.u.tail(n2_);
  const Vector v1 = state.v[0].head(n1_), v2 = state.v[0].tail(n2_);

  // (1) explicit v2 row
  Vector v2_new(n2_);
  if (n2_ > 0) {
    const Vector rhs = m22_ * v2 * (1.0 / dt_ - beta) - cv22_ * v2 + m22_ * u2;
    v2_new = m22_lu_.solve(rhs * dt_);
    v2_new += m22_lu_.solve((rhs - m22_ * v2_new / dt_) * dt_);
  }

  // (2) coupled solve for (v1, u1, u2)
  const Vector conv_u = ops_.convection_u * state.u;
  const Vector src = ops_.source;
  Vector rhs(2 * n1_ + n2_);
  rhs.head(n1_) = m11_ * v1 * (1.0 / dt_ - beta) - cv11_ * v1;
  rhs.segment(n1_, n1_) = (m11_ * u1 + m12_ * u2) / dt_ - conv_u.head(n1_) - a12_ * v2_new + src.head(n1_);
  rhs.tail(n2_) = (m21_ * u1 + m22_ * u2) / dt_ - conv_u.tail(n2_) - a22_ * v2_new + src.tail(n2_);
  Vector x = coupled_lu_.solve(rhs);
  x += coupled_lu_.solve(Vector(rhs - coupled_ * x));

  CoupledState next;
  next.step = state.step + 1;
  next.time = next.step * dt_;
  next.u.resize(n1_ + n2_);
  next.u.head(n1_) = x.segment(n1_, n1_);
  next.u.tail(n2_) = x.tail(n2_);
  next.v.assign(1, Vector(n1_ + n2_));
  next.v[0].head(n1_) = x.head(n1_);
  next.v[0].tail(n2_) = v2_new;

  if (max_residual) {
    const Vector u1n = next.u.head(n1_), u2n = next.u.tail(n2_);
    const Vector v1n = x.head(n1_);
    double res = relative_residual({term(m11_, v1n, 1.0 / dt_), term(m11_, v1, -1.0 / dt_), term(m11_, v1, beta),
                                    term(cv11_, v1, 1.0), term(m11_, u1n, -1.0)});
    if (n2_ > 0) {
      res = std::max(res, relative_residual({term(m22_, v2_new, 1.0 / dt_), term(m22_, v2, -1.0 / dt_),
                                             term(m22_, v2, beta), term(cv22_, v2, 1.0), term(m22_, u2, -1.0)}));
    }
    const Term mu_new = term(ops_.mass_u, next.u, 1.0 / dt_);
    const Term mu_old = term(ops_.mass_u, state.u, -1.0 / dt_);
    const Term conv = term(ops_.convection_u, state.u, 1.0);
    const Term diff = term(ops_.stiffness_uv[0], next.v[0], 1.0);
    const Term source = vector_term(src, -1.0);
    res = std::max(res, relative_residual({mu_new.head(n1_), mu_old.head(n1_), conv.head(n1_), diff.head(n1_),
                                           source.head(n1_)}));
    if (n2_ > 0) {
      res = std::max(res, relative_residual({mu_new.tail(n2_), mu_old.tail(n2_), conv.tail(n2_), diff.tail(n2_),
                                             source.tail(n2_)}));
    }
    *max_residual = res;
  }
  return next;
}

std::unique_ptr<TimeScheme> make_scheme(const SchemeOperators& ops, const SchemeConfig& config) {
  if (config.scheme == SchemeKind::Implicit) return std::make_unique<ImplicitScheme>(ops, config.dt);
  return std::make_unique<PartiallyExplicitScheme>(ops, config);
}

double relative_l2_error(const Vector& coefficients, const SparseMatrix& prolongation, const Vector& reference,
                         const SparseMatrix& fine_mass) {
  const double ref = std::sqrt(reference.dot(fine_mass * reference));
  if (!(ref > 0.0)) throw std::invalid_argument("relative error against a zero reference");
  const Vector diff = prolongation * coefficients - reference;
  return std::sqrt(diff.dot(fine_mass * diff)) / ref;
}

RunResult run(const TimeScheme& scheme, const SchemeOperators& ops, const DiscreteSpace& space,
              const CoupledState& initial, const RunOptions& options) {
  if (options.steps < 0) throw std::invalid_argument("step count must be >= 0");
  if (options.reference && !options.fine_mass) throw std::invalid_argument("error tracking needs the fine mass");
  if (options.reference && static_cast<int>(options.reference->size()) < options.steps + 1)
    throw std::invalid_argument("reference trajectory is shorter than the run");
  RunResult out;
  auto record = [&](const CoupledState& s, double residual) {
    TraceRow row;
    row.n = s.step;
    row.t = s.step * scheme.dt();
    const Energies e = energy(s, ops);
    row.energy = e.energy;
    row.split_energy = e.split_energy;
    row.residual = residual;
    if (options.reference) {
      const Vector& ref = (*options.reference)[s.step];
      if (ref.dot(*options.fine_mass * ref) > 0.0)
        row.rel_l2_error = relative_l2_error(s.u, space.prolongation, ref, *options.fine_mass);
    }
    out.trace.push_back(row);
    const bool terminal = s.step == options.steps;
    const bool strided = options.snapshot_stride > 0 && s.step % options.snapshot_stride == 0;
    if (terminal || strided) out.snapshots.push_back({s.step, space.prolongation * s.u});
    if (options.keep_trajectory) out.trajectory.push_back(space.prolongation * s.u);
  };
  CoupledState state = initial;
  record(state, 0.0);
  for (int n = 0; n < options.steps; ++n) {
    double residual = 0.0;
    state = scheme.step(state, &residual);
    out.max_residual = std::max(out.max_residual, residual);
    record(state, residual);
  }
  out.final_state = std::move(state);
  return out;
}

} // namespace memcem
