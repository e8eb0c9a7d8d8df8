#include "memcem/cem_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include "memcem/errors.hpp"

namespace memcem {

SparseMatrix partition_of_unity(const GridHierarchy& grid) {
  const int r = grid.refine();
  const int cn = grid.coarse_n();
  std::vector<Eigen::Triplet<double>> t;
  for (int j = 0; j <= grid.fine_n(); ++j) {
    for (int i = 0; i <= grid.fine_n(); ++i) {
      const int I0 = std::min(i / r, cn - 1), J0 = std::min(j / r, cn - 1);
      for (int J = J0; J <= J0 + 1; ++J)
        for (int I = I0; I <= I0 + 1; ++I) {
          const double wx = 1.0 - std::abs(i - I * r) / static_cast<double>(r);
          const double wy = 1.0 - std::abs(j - J * r) / static_cast<double>(r);
          if (wx > 0.0 && wy > 0.0) t.emplace_back(grid.node(i, j), J * (cn + 1) + I, wx * wy);
        }
    }
  }
  SparseMatrix chi(grid.num_nodes(), grid.num_coarse_nodes());
  chi.setFromTriplets(t.begin(), t.end());
  return chi;
}

std::vector<double> pou_gradient_energy(const GridHierarchy& grid) {
  const int r = grid.refine();
  const double H = grid.coarse_h();
  const double g = 0.5 / std::sqrt(3.0);
  const double pts[2] = {0.5 - g, 0.5 + g};
  std::vector<double> energy(grid.num_cells());
  for (int c = 0; c < grid.num_cells(); ++c) {
    const int i = c % grid.fine_n(), j = c / grid.fine_n();
    double sum = 0.0;
    for (double qy : pts)
      for (double qx : pts) {
        // local coordinates in the coarse element
        const double xi = ((i % r) + qx) / r;
        const double eta = ((j % r) + qy) / r;
        // four bilinear hats of the element
        const double gx[4] = {-(1 - eta), (1 - eta), eta, -eta};
        const double gy[4] = {-(1 - xi), -xi, xi, 1 - xi};
        double s = 0.0;
        for (int a = 0; a < 4; ++a) s += gx[a] * gx[a] + gy[a] * gy[a];
        sum += 0.25 * s / (H * H);
      }
    energy[c] = sum;
  }
  return energy;
}

std::vector<double> s_weight(const GridHierarchy& grid, const PermeabilityField& kappa, SWeight choice) {
  kappa.check_matches(grid);
  kappa.validate();
  std::vector<double> w(kappa.values);
  if (choice == SWeight::KappaOverH2) {
    const double H = grid.coarse_h();
    for (double& x : w) x /= H * H;
  } else {
    const auto pou = pou_gradient_energy(grid);
    for (std::size_t c = 0; c < w.size(); ++c) w[c] *= pou[c];
  }
  return w;
}

void normalize_signs(Matrix& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index k = 0; k < vectors.rows(); ++k) {
      const double a = std::abs(vectors(k, j));
      if (a > best_abs) {
        best_abs = a;
        best = k;
      }
    }
    if (vectors.rows() > 0 && vectors(best, j) < 0.0) vectors.col(j) *= -1.0;
  }
}

namespace {

ElementEigenpairs generalized_smallest(const Matrix& a, const Matrix& b, int count, const char* what) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(a, b, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success) throw NumericalError(std::string(what) + ": eigen-solve did not converge");
  ElementEigenpairs out;
  out.values = es.eigenvalues().head(count);
  out.vectors = es.eigenvectors().leftCols(count);
  normalize_signs(out.vectors);
  return out;
}

std::vector<int> region_columns(const OversamplingRegion& region, const std::vector<int>& offsets) {
  std::vector<int> cols;
  for (int e : region.elements)
    for (int c = offsets[e]; c < offsets[e + 1]; ++c) cols.push_back(c);
  return cols;
}

int position_of(const std::vector<int>& sorted, int value) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), value);
  return static_cast<int>(it - sorted.begin());
}

// Solves [A C; C^T 0] x = [0; rhs] for every column of rhs; returns the first block.
Matrix solve_saddle(const SparseMatrix& a, const std::vector<SparseMatrix>& constraints, const Matrix& rhs,
                    const char* what) {
  const int n = static_cast<int>(a.rows());
  int nc = 0;
  for (const auto& c : constraints) nc += static_cast<int>(c.cols());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(a.nonZeros()) + 2 * nc * 100);
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  int offset = n;
  for (const auto& c : constraints) {
    for (int k = 0; k < c.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(c, k); it; ++it) {
        t.emplace_back(it.row(), offset + it.col(), it.value());
        t.emplace_back(offset + it.col(), it.row(), it.value());
      }
    offset += static_cast<int>(c.cols());
  }
  SparseMatrix kkt(n + nc, n + nc);
  kkt.setFromTriplets(t.begin(), t.end());
  kkt.makeCompressed();

  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(kkt);
  if (lu.info() != Eigen::Success)
    throw NumericalError(std::string(what) + ": singular saddle system (rank-deficient constraints?)");
  Matrix full_rhs = Matrix::Zero(n + nc, rhs.cols());
  full_rhs.bottomRows(nc) = rhs;
  Matrix x = lu.solve(full_rhs);
  if (lu.info() != Eigen::Success || !x.allFinite())
    throw NumericalError(std::string(what) + ": saddle solve failed");
  // one step of iterative refinement keeps the constraints at round-off level
  const Matrix r = full_rhs - kkt * x;
  x += lu.solve(r);
  return x.topRows(n);
}

} // namespace

ElementEigenpairs solve_auxiliary_eigen(const GridHierarchy& grid, const SparseMatrix& stiffness,
                                        const SparseMatrix& s_operator, int element, int count) {
  if (element < 0 || element >= grid.num_coarse_elements())
    throw std::invalid_argument("element index out of range");
  const auto interior = grid.coarse_element_interior_nodes(element);
  std::vector<int> nodes(interior.begin(), interior.end());
  if (count < 1 || count > static_cast<int>(nodes.size()))
    throw std::invalid_argument("auxiliary mode count " + std::to_string(count) + " outside [1, " +
                                std::to_string(nodes.size()) + "]");
  const Matrix a = extract_dense(stiffness, nodes, nodes);
  const Matrix s = extract_dense(s_operator, nodes, nodes);
  ElementEigenpairs out = generalized_smallest(a, s, count, "auxiliary eigenproblem");
  out.element = element;
  out.nodes = std::move(nodes);
  return out;
}

AuxiliaryBasis build_auxiliary_basis(const GridHierarchy& grid, const PermeabilityField& kappa,
                                     const SparseMatrix& stiffness, int count, SWeight weight) {
  AuxiliaryBasis aux;
  aux.weight = s_weight(grid, kappa, weight);
  aux.s_operator = assemble_mass(grid, aux.weight);
  const int ne = grid.num_coarse_elements();
  aux.offsets.assign(ne + 1, 0);
  std::vector<Eigen::Triplet<double>> t;
  for (int e = 0; e < ne; ++e) {
    aux.elements.push_back(solve_auxiliary_eigen(grid, stiffness, aux.s_operator, e, count));
    const auto& ep = aux.elements.back();
    aux.offsets[e + 1] = aux.offsets[e] + static_cast<int>(ep.values.size());
    for (int j = 0; j < ep.vectors.cols(); ++j)
      for (std::size_t k = 0; k < ep.nodes.size(); ++k)
        t.emplace_back(ep.nodes[k], aux.offsets[e] + j, ep.vectors(static_cast<Eigen::Index>(k), j));
  }
  aux.psi.resize(grid.num_nodes(), aux.offsets.back());
  aux.psi.setFromTriplets(t.begin(), t.end());
  aux.s_psi = aux.s_operator * aux.psi;
  return aux;
}

OversamplingRegion oversample(const GridHierarchy& grid, int element, int m) {
  if (m < 0) throw std::invalid_argument("oversampling parameter must be >= 0");
  const int cn = grid.coarse_n();
  if (element < 0 || element >= cn * cn) throw std::invalid_argument("element index out of range");
  const int I = element % cn, J = element / cn;
  OversamplingRegion r;
  r.i0 = std::max(0, I - m);
  r.i1 = std::min(cn - 1, I + m);
  r.j0 = std::max(0, J - m);
  r.j1 = std::min(cn - 1, J + m);
  for (int j = r.j0; j <= r.j1; ++j)
    for (int i = r.i0; i <= r.i1; ++i) r.elements.push_back(j * cn + i);
  return r;
}

LocalColumns solve_cem_basis(const GridHierarchy& grid, const SparseMatrix& stiffness, const AuxiliaryBasis& aux,
                             int element, int m) {
  const OversamplingRegion region = oversample(grid, element, m);
  LocalColumns out;
  out.nodes = patch_interior_nodes(grid, region.i0, region.i1, region.j0, region.j1);
  const std::vector<int> cols = region_columns(region, aux.offsets);
  const SparseMatrix a = extract_submatrix(stiffness, out.nodes, out.nodes);
  const SparseMatrix c = extract_submatrix(aux.s_psi, out.nodes, cols);

  const int count = aux.offsets[element + 1] - aux.offsets[element];
  Matrix rhs = Matrix::Zero(static_cast<Eigen::Index>(cols.size()), count);
  for (int j = 0; j < count; ++j) rhs(position_of(cols, aux.offsets[element] + j), j) = 1.0;
  out.values = solve_saddle(a, {c}, rhs, "multiscale basis");
  return out;
}

ElementEigenpairs solve_explicit_eigen(const GridHierarchy& grid, const SparseMatrix& stiffness,
                                       const SparseMatrix& mass, const AuxiliaryBasis& aux, int element, int count) {
  if (element < 0 || element >= grid.num_coarse_elements())
    throw std::invalid_argument("coarse element " + std::to_string(element) + " out of range");
  const ElementEigenpairs& psi = aux.elements.at(element);
  const std::vector<int>& nodes = psi.nodes;
  const int n = static_cast<int>(nodes.size());
  const int nc = static_cast<int>(psi.vectors.cols());
  if (count < 1 || count > n - nc)
    throw std::invalid_argument("explicit mode count " + std::to_string(count) + " outside [1, " +
                                std::to_string(n - nc) + "]");
  const Matrix a = extract_dense(stiffness, nodes, nodes);
  const Matrix mm = extract_dense(mass, nodes, nodes);
  const Matrix s = extract_dense(aux.s_operator, nodes, nodes);
  const Matrix constraint = s * psi.vectors;  // n x nc, columns span the s-duals of psi

  Eigen::ColPivHouseholderQR<Matrix> rank_check(constraint);
  if (rank_check.rank() < nc) throw NumericalError("explicit eigenproblem: rank-deficient projection constraints");
  Eigen::HouseholderQR<Matrix> qr(constraint);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix z = q.rightCols(n - nc);  // null-space basis of constraint^T

  const Matrix ar = z.transpose() * a * z;
  const Matrix mr = z.transpose() * mm * z;
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(ar, mr, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success) throw NumericalError("explicit eigenproblem: eigen-solve did not converge");
  ElementEigenpairs out;
  out.element = element;
  out.nodes = nodes;
  out.values = es.eigenvalues().head(count);
  out.vectors = z * es.eigenvectors().leftCols(count);
  normalize_signs(out.vectors);
  return out;
}

LocalColumns solve_explicit_basis(const GridHierarchy& grid, const SparseMatrix& stiffness, const AuxiliaryBasis& aux,
                                  const ExplicitModes& modes, int element, int m) {
  const OversamplingRegion region = oversample(grid, element, m);
  LocalColumns out;
  out.nodes = patch_interior_nodes(grid, region.i0, region.i1, region.j0, region.j1);
  const std::vector<int> s_cols = region_columns(region, aux.offsets);
  const std::vector<int> m_cols = region_columns(region, modes.offsets);
  const SparseMatrix a = extract_submatrix(stiffness, out.nodes, out.nodes);
  const SparseMatrix cs = extract_submatrix(aux.s_psi, out.nodes, s_cols);
  const SparseMatrix cm = extract_submatrix(modes.m_xi, out.nodes, m_cols);

  const int first = modes.offsets[element];
  const int count = modes.offsets[element + 1] - first;
  Matrix rhs = Matrix::Zero(static_cast<Eigen::Index>(s_cols.size() + m_cols.size()), count);
  for (int j = 0; j < count; ++j) {
    const Vector xi = modes.xi.col(first + j);
    const Vector moments = modes.m_xi.transpose() * xi;
    for (std::size_t k = 0; k < m_cols.size(); ++k)
      rhs(static_cast<Eigen::Index>(s_cols.size() + k), j) = moments[m_cols[k]];
  }
  out.values = solve_saddle(a, {cs, cm}, rhs, "explicit basis");
  return out;
}

SparseMatrix SpaceDecomposition::combined() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(basis_v1.nonZeros() + basis_v2.nonZeros()));
  for (int k = 0; k < basis_v1.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(basis_v1, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < basis_v2.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(basis_v2, k); it; ++it)
      t.emplace_back(it.row(), dim_v1() + it.col(), it.value());
  SparseMatrix b(basis_v1.rows(), dim_v1() + dim_v2());
  b.setFromTriplets(t.begin(), t.end());
  return b;
}

namespace {

SparseMatrix embed_columns(int rows, const std::vector<LocalColumns>& blocks) {
  std::vector<Eigen::Triplet<double>> t;
  int col = 0;
  for (const auto& b : blocks) {
    for (Eigen::Index j = 0; j < b.values.cols(); ++j, ++col)
      for (std::size_t k = 0; k < b.nodes.size(); ++k) {
        const double v = b.values(static_cast<Eigen::Index>(k), j);
        if (v != 0.0) t.emplace_back(b.nodes[k], col, v);
      }
  }
  SparseMatrix m(rows, col);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

} // namespace

SpaceDecomposition build_decomposition(const GridHierarchy& grid, const PermeabilityField& kappa,
                                       const CemParameters& params) {
  if (params.explicit_per_element < 0) throw std::invalid_argument("explicit mode count must be >= 0");
  const SparseMatrix stiffness = assemble_stiffness(grid, kappa.values);
  const SparseMatrix mass = assemble_mass(grid);
  SpaceDecomposition dec;
  dec.params = params;
  dec.aux = build_auxiliary_basis(grid, kappa, stiffness, params.aux_per_element, params.weight);

  const int ne = grid.num_coarse_elements();
  std::vector<LocalColumns> v1_blocks;
  for (int e = 0; e < ne; ++e) {
    v1_blocks.push_back(solve_cem_basis(grid, stiffness, dec.aux, e, params.oversampling));
    for (int j = 0; j < params.aux_per_element; ++j)
      dec.v1_info.push_back({e, j, dec.aux.elements[e].values[j]});
  }
  dec.basis_v1 = embed_columns(grid.num_nodes(), v1_blocks);

  dec.modes.offsets.assign(ne + 1, 0);
  if (params.explicit_per_element > 0) {
    std::vector<LocalColumns> xi_blocks;
    for (int e = 0; e < ne; ++e) {
      dec.modes.elements.push_back(
          solve_explicit_eigen(grid, stiffness, mass, dec.aux, e, params.explicit_per_element));
      const auto& ep = dec.modes.elements.back();
      dec.modes.offsets[e + 1] = dec.modes.offsets[e] + static_cast<int>(ep.values.size());
      xi_blocks.push_back({ep.nodes, ep.vectors});
    }
    dec.modes.xi = embed_columns(grid.num_nodes(), xi_blocks);
    dec.modes.m_xi = mass * dec.modes.xi;

    std::vector<LocalColumns> v2_blocks;
    for (int e = 0; e < ne; ++e) {
      v2_blocks.push_back(solve_explicit_basis(grid, stiffness, dec.aux, dec.modes, e, params.oversampling));
      for (int j = 0; j < params.explicit_per_element; ++j)
        dec.v2_info.push_back({e, j, dec.modes.elements[e].values[j]});
    }
    dec.basis_v2 = embed_columns(grid.num_nodes(), v2_blocks);
  } else {
    dec.modes.xi.resize(grid.num_nodes(), 0);
    dec.modes.m_xi.resize(grid.num_nodes(), 0);
    dec.basis_v2.resize(grid.num_nodes(), 0);
  }
  return dec;
}

Matrix gram(const SparseMatrix& left, const SparseMatrix& op, const SparseMatrix& right) {
  const SparseMatrix opr = op * right;
  return Matrix(left.transpose() * opr);
}

namespace {

double condition_number(const Matrix& g) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

} // namespace

double gamma_from_grams(const Matrix& g11, const Matrix& g12, const Matrix& g22) {
  if (g11.rows() == 0 || g22.rows() == 0) return 0.0;
  Eigen::LLT<Matrix> l1(g11), l2(g22);
  if (l1.info() != Eigen::Success)
    throw NumericalError("first basis Gram matrix is not positive definite (condition " +
                         std::to_string(condition_number(g11)) + ")");
  if (l2.info() != Eigen::Success)
    throw NumericalError("second basis Gram matrix is not positive definite (condition " +
                         std::to_string(condition_number(g22)) + ")");
  Matrix x = l1.matrixL().solve(g12);
  x = l2.matrixL().solve(x.transpose()).transpose();
  Eigen::JacobiSVD<Matrix> svd(x);
  const double gamma = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  if (!(gamma < 1.0 - 1e-10))
    throw NumericalError("subspaces intersect: cosine " + std::to_string(gamma) + " (not a direct sum)");
  return gamma;
}

double compute_gamma(const SparseMatrix& basis_v1, const SparseMatrix& basis_v2, const SparseMatrix& mass) {
  if (basis_v1.cols() == 0 || basis_v2.cols() == 0) return 0.0;
  return gamma_from_grams(gram(basis_v1, mass, basis_v1), gram(basis_v1, mass, basis_v2),
                          gram(basis_v2, mass, basis_v2));
}

SchemeConstants compute_dt_bound(const SparseMatrix& basis_v2, double beta, double gamma, const SparseMatrix& stiffness,
                                 const SparseMatrix& mass) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  SchemeConstants sc;
  sc.gamma = gamma;
  if (basis_v2.cols() == 0) {
    sc.dt_bound = std::numeric_limits<double>::infinity();
    return sc;
  }
  const Matrix ga = gram(basis_v2, stiffness, basis_v2);
  const Matrix gm = gram(basis_v2, mass, basis_v2);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(ga, gm, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success) throw NumericalError("explicit-space eigen-solve failed");
  sc.lambda_max = es.eigenvalues().maxCoeff();
  if (!(sc.lambda_max > 0.0)) throw NumericalError("explicit space carries no energy");
  sc.dt_bound = beta * (1.0 - gamma) / sc.lambda_max;
  return sc;
}

SchemeConstants compute_scheme_constants(const SpaceDecomposition& dec, double beta, const SparseMatrix& stiffness,
                                         const SparseMatrix& mass) {
  const double gamma = compute_gamma(dec.basis_v1, dec.basis_v2, mass);
  return compute_dt_bound(dec.basis_v2, beta, gamma, stiffness, mass);
}

void export_basis(const std::filesystem::path& path, const GridHierarchy& grid, const SparseMatrix& basis,
                  const std::vector<ColumnInfo>& info) {
  if (basis.rows() != grid.num_nodes()) throw std::invalid_argument("basis rows do not match the fine grid");
  if (static_cast<Eigen::Index>(info.size()) != basis.cols())
    throw std::invalid_argument("one ColumnInfo per basis column required");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write basis file " + path.string());
  const int side = grid.fine_n() + 1;
  out << "basis " << basis.cols() << ' ' << side << ' ' << side << '\n';
  char buf[64];
  auto put = [&](double v) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
  };
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    const Vector col = basis.col(c);
    out << info[c].element << ' ' << info[c].index << ' ';
    put(info[c].eigenvalue);
    out << '\n';
    for (int j = 0; j < side; ++j) {
      for (int i = 0; i < side; ++i) {
        if (i) out << ' ';
        put(col[grid.node(i, j)]);
      }
      out << '\n';
    }
  }
}

SparseMatrix import_basis(const std::filesystem::path& path, const GridHierarchy& grid, std::vector<ColumnInfo>* info) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open basis file " + path.string());
  std::string tag;
  long cols = 0;
  int rows_side = 0, cols_side = 0;
  if (!(in >> tag >> cols >> rows_side >> cols_side) || tag != "basis")
    throw std::invalid_argument("basis file header must be 'basis <columns> <rows> <cols>'");
  const int side = grid.fine_n() + 1;
  if (rows_side != side || cols_side != side)
    throw std::invalid_argument("basis node grid does not match the fine grid");
  std::vector<Eigen::Triplet<double>> t;
  if (info) info->clear();
  for (long c = 0; c < cols; ++c) {
    ColumnInfo ci;
    if (!(in >> ci.element >> ci.index >> ci.eigenvalue))
      throw std::invalid_argument("truncated basis file at column " + std::to_string(c));
    if (info) info->push_back(ci);
    for (int j = 0; j < side; ++j)
      for (int i = 0; i < side; ++i) {
        double v = 0.0;
        if (!(in >> v)) throw std::invalid_argument("truncated basis block at column " + std::to_string(c));
        if (v != 0.0) t.emplace_back(grid.node(i, j), static_cast<int>(c), v);
      }
  }
  SparseMatrix b(grid.num_nodes(), cols);
  b.setFromTriplets(t.begin(), t.end());
  return b;
}

} // namespace memcem
