#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "memcem/fields.hpp"
#include "memcem/grid.hpp"

namespace memcem {

// Exact homogenization of transport in a stratified medium: layer i has
// width m_i and velocity a_i. The averaged solution obeys a transport
// equation with mean velocity a-bar plus a memory term whose kernel is a sum
// of exponentials with rates given by the interface nodes u_i and weights
// beta_i.

struct LayeredMedium {
  std::vector<double> widths;      ///< m_i > 0, summing to 1
  std::vector<double> velocities;  ///< strictly increasing after canonicalize()

  int size() const { return static_cast<int>(widths.size()); }
};

/// Sorts by velocity and merges layers with equal velocity. Throws for
/// nonpositive or nonfinite widths, nonfinite velocities, or widths not
/// summing to 1 within 1e-12.
LayeredMedium canonicalize(const LayeredMedium& medium);

/// sum_k m_k / (x - a_k).
double node_function(const LayeredMedium& medium, double x);

/// One root of the node function in every gap (a_i, a_{i+1}) of a canonical
/// medium, by bisection.
std::vector<double> solve_interface_nodes(const LayeredMedium& medium);

struct UpscaledKernel {
  double mean_velocity = 0.0;
  double variance = 0.0;
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> node_residuals;    ///< |f(u_i)|
  std::vector<double> weight_residuals;  ///< per layer k: sum_i beta_i/(u_i - a_k) - (a-bar - a_k)
  bool weights_nonnegative = true;
};

/// Least-squares solve of sum_i beta_i / (u_i - a_k) = a-bar - a_k over all k.
/// Throws NumericalError when the residual exceeds 1e-9 max(1, |rhs|).
UpscaledKernel solve_kernel_weights(const LayeredMedium& medium, const std::vector<double>& nodes);

/// Canonicalize, nodes, weights.
UpscaledKernel upscale(const LayeredMedium& medium);

/// sum_i m_i H(x - a_i t) with H(0) = 1. Throws for t < 0.
double averaged_heaviside_solution(const LayeredMedium& medium, double x, double t);

struct StabilityReport {
  double min_value = 0.0;
  std::vector<int> violating_cells;  ///< cells where beta kappa + a~ . grad kappa < 0
  std::vector<double> values;        ///< per cell
};

/// Cellwise beta kappa + a_tilde . grad kappa with forward differences
/// (backward in the last cell of a row or column).
StabilityReport check_continuous_stability(const GridHierarchy& grid, const PermeabilityField& kappa,
                                           const std::array<double, 2>& a_tilde, double beta);

/// Two columns "m,a" per line; '#' lines and a non-numeric header line are skipped.
LayeredMedium load_medium(const std::filesystem::path& path);
void save_kernel(const std::filesystem::path& path, const UpscaledKernel& kernel, const std::string& header_comment);

} // namespace memcem
