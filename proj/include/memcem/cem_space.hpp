#pragma once

#include <filesystem>
#include <vector>

#include "memcem/assembly.hpp"
#include "memcem/fields.hpp"
#include "memcem/grid.hpp"

namespace memcem {

// Constraint energy minimizing multiscale spaces.
//
// The implicit space V1 is spanned by energy minimizers constrained to
// reproduce local spectral modes psi (auxiliary space) in the s-inner
// product. The explicit space V2 lives in the kernel of the s-projection onto
// the auxiliary space and reproduces the L2 moments of a second family of
// local modes xi. All basis columns are fine-nodal vectors.

enum class SWeight {
  KappaOverH2,       ///< kappa / H^2, H the coarse side length
  KappaPouGradient,  ///< kappa * sum_i |grad chi_i|^2, cell-averaged
};

struct CemParameters {
  int aux_per_element = 3;       ///< L_i
  int explicit_per_element = 3;  ///< J_i
  int oversampling = 4;          ///< m
  SWeight weight = SWeight::KappaPouGradient;
};

/// Bilinear coarse hat functions sampled at fine nodes (fine nodes x coarse nodes).
SparseMatrix partition_of_unity(const GridHierarchy& grid);
/// Cell average of sum_i |grad chi_i|^2 on every fine cell (exact, 2x2 Gauss).
std::vector<double> pou_gradient_energy(const GridHierarchy& grid);
/// Per-cell weight of the s-inner product.
std::vector<double> s_weight(const GridHierarchy& grid, const PermeabilityField& kappa, SWeight choice);

/// Eigenpairs of one coarse element; vectors are in the coordinates of `nodes`.
struct ElementEigenpairs {
  int element = -1;
  std::vector<int> nodes;
  Vector values;
  Matrix vectors;
};

/// Flips each column so that its entry of largest magnitude is positive
/// (lowest index wins ties).
void normalize_signs(Matrix& vectors);

/// Smallest `count` eigenpairs of A psi = lambda S psi on the interior nodes of
/// the element; vectors are S-orthonormal.
ElementEigenpairs solve_auxiliary_eigen(const GridHierarchy& grid, const SparseMatrix& stiffness,
                                        const SparseMatrix& s_operator, int element, int count);

struct AuxiliaryBasis {
  std::vector<double> weight;       ///< per-cell s weight
  SparseMatrix s_operator;          ///< global s-inner product
  std::vector<ElementEigenpairs> elements;
  std::vector<int> offsets;         ///< first auxiliary column of each element
  SparseMatrix psi;                 ///< fine nodes x aux columns
  SparseMatrix s_psi;               ///< S * psi

  int size() const { return static_cast<int>(psi.cols()); }
  /// Coordinates of the s-projection onto the auxiliary space.
  Vector project(const Vector& fine) const { return s_psi.transpose() * fine; }
};

AuxiliaryBasis build_auxiliary_basis(const GridHierarchy& grid, const PermeabilityField& kappa,
                                     const SparseMatrix& stiffness, int count, SWeight weight);

/// Coarse-element block K_{i,m}, clipped to the domain.
struct OversamplingRegion {
  int i0 = 0, i1 = 0, j0 = 0, j1 = 0;  ///< inclusive coarse index ranges
  std::vector<int> elements;           ///< sorted
};

OversamplingRegion oversample(const GridHierarchy& grid, int element, int m);

/// Local columns supported on a node subset.
struct LocalColumns {
  std::vector<int> nodes;
  Matrix values;
};

/// Constrained energy minimizers phi_j for every auxiliary mode of `element`.
LocalColumns solve_cem_basis(const GridHierarchy& grid, const SparseMatrix& stiffness, const AuxiliaryBasis& aux,
                             int element, int m);

/// Smallest `count` eigenpairs of A xi = gamma M xi on V(K_i) intersected
/// with the kernel of the s-projection; vectors are M-orthonormal.
ElementEigenpairs solve_explicit_eigen(const GridHierarchy& grid, const SparseMatrix& stiffness,
                                       const SparseMatrix& mass, const AuxiliaryBasis& aux, int element, int count);

/// Second-family modes stacked as fine-nodal columns with element offsets.
struct ExplicitModes {
  std::vector<ElementEigenpairs> elements;
  std::vector<int> offsets;
  SparseMatrix xi;      ///< fine nodes x modes
  SparseMatrix m_xi;    ///< M * xi
};

/// Columns zeta_j of `element`: minimal energy with zero s-projection and the
/// L2 moments of xi_j against every second-family mode in the patch.
LocalColumns solve_explicit_basis(const GridHierarchy& grid, const SparseMatrix& stiffness, const AuxiliaryBasis& aux,
                                  const ExplicitModes& modes, int element, int m);

struct ColumnInfo {
  int element = -1;
  int index = -1;
  double eigenvalue = 0.0;
};

struct SpaceDecomposition {
  CemParameters params;
  AuxiliaryBasis aux;
  ExplicitModes modes;
  SparseMatrix basis_v1;  ///< fine nodes x dim V1
  SparseMatrix basis_v2;  ///< fine nodes x dim V2
  std::vector<ColumnInfo> v1_info;
  std::vector<ColumnInfo> v2_info;

  int dim_v1() const { return static_cast<int>(basis_v1.cols()); }
  int dim_v2() const { return static_cast<int>(basis_v2.cols()); }
  /// [V1 V2] side by side.
  SparseMatrix combined() const;
};

/// Full construction. `explicit_per_element = 0` yields an empty V2.
SpaceDecomposition build_decomposition(const GridHierarchy& grid, const PermeabilityField& kappa,
                                       const CemParameters& params);

/// B_i^T op B_j as a dense matrix.
Matrix gram(const SparseMatrix& left, const SparseMatrix& op, const SparseMatrix& right);

/// Largest cosine between the column spaces given their M-Gram blocks.
/// Throws NumericalError when a diagonal block is not positive definite or the
/// spaces intersect (cosine numerically 1). An empty block gives 0.
double gamma_from_grams(const Matrix& g11, const Matrix& g12, const Matrix& g22);
double compute_gamma(const SparseMatrix& basis_v1, const SparseMatrix& basis_v2, const SparseMatrix& mass);

struct SchemeConstants {
  double gamma = 0.0;
  double lambda_max = 0.0;  ///< largest eigenvalue of (A, M) on V2
  double dt_bound = 0.0;
};

/// beta (1 - gamma) / lambda_max; +inf for an empty V2.
SchemeConstants compute_dt_bound(const SparseMatrix& basis_v2, double beta, double gamma, const SparseMatrix& stiffness,
                                 const SparseMatrix& mass);
SchemeConstants compute_scheme_constants(const SpaceDecomposition& dec, double beta, const SparseMatrix& stiffness,
                                         const SparseMatrix& mass);

/// Basis file: "basis <columns> <rows> <cols>" then per column a line
/// "<element> <index> <eigenvalue>" followed by a node grid block.
void export_basis(const std::filesystem::path& path, const GridHierarchy& grid, const SparseMatrix& basis,
                  const std::vector<ColumnInfo>& info);
SparseMatrix import_basis(const std::filesystem::path& path, const GridHierarchy& grid, std::vector<ColumnInfo>* info);

} // namespace memcem
