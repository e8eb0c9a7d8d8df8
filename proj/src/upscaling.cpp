#include "memcem/upscaling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "memcem/errors.hpp"

namespace memcem {

LayeredMedium canonicalize(const LayeredMedium& medium) {
  if (medium.widths.size() != medium.velocities.size())
    throw std::invalid_argument("widths and velocities differ in length");
  if (medium.widths.empty()) throw std::invalid_argument("medium has no layers");
  double total = 0.0;
  for (std::size_t i = 0; i < medium.widths.size(); ++i) {
    const double m = medium.widths[i];
    if (!std::isfinite(m) || m <= 0.0)
      throw std::invalid_argument("layer " + std::to_string(i) + " has nonpositive width");
    if (!std::isfinite(medium.velocities[i]))
      throw std::invalid_argument("layer " + std::to_string(i) + " has a nonfinite velocity");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("layer widths do not sum to 1");

  std::vector<std::size_t> order(medium.widths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return medium.velocities[a] < medium.velocities[b]; });
  LayeredMedium out;
  for (std::size_t k : order) {
    const double a = medium.velocities[k];
    if (!out.velocities.empty() && out.velocities.back() == a)
      out.widths.back() += medium.widths[k];
    else {
      out.velocities.push_back(a);
      out.widths.push_back(medium.widths[k]);
    }
  }
  return out;
}

double node_function(const LayeredMedium& medium, double x) {
  double f = 0.0;
  for (int k = 0; k < medium.size(); ++k) f += medium.widths[k] / (x - medium.velocities[k]);
  return f;
}

std::vector<double> solve_interface_nodes(const LayeredMedium& medium) {
  std::vector<double> nodes;
  for (int i = 0; i + 1 < medium.size(); ++i) {
    double lo = medium.velocities[i], hi = medium.velocities[i + 1];
    if (!(lo < hi)) throw std::invalid_argument("velocities must be strictly increasing");
    // f runs from +inf to -inf across the gap; bisect until the bracket stops shrinking
    for (;;) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (node_function(medium, mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    const bool lo_ok = lo > medium.velocities[i];
    const bool hi_ok = hi < medium.velocities[i + 1];
    double best = lo_ok ? lo : hi;
    if (lo_ok && hi_ok && std::abs(node_function(medium, hi)) < std::abs(node_function(medium, lo))) best = hi;
    nodes.push_back(best);
  }
  return nodes;
}

UpscaledKernel solve_kernel_weights(const LayeredMedium& medium, const std::vector<double>& nodes) {
  const int n = medium.size();
  if (static_cast<int>(nodes.size()) != n - 1) throw std::invalid_argument("need one node per layer gap");
  UpscaledKernel out;
  for (int k = 0; k < n; ++k) out.mean_velocity += medium.widths[k] * medium.velocities[k];
  for (int k = 0; k < n; ++k) {
    const double d = medium.velocities[k] - out.mean_velocity;
    out.variance += medium.widths[k] * d * d;
  }
  out.nodes = nodes;
  for (double u : nodes) out.node_residuals.push_back(std::abs(node_function(medium, u)));
  if (n == 1) {
    out.weight_residuals.assign(1, 0.0);
    return out;
  }

  Eigen::MatrixXd g(n, n - 1);
  Eigen::VectorXd rhs(n);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n - 1; ++i) g(k, i) = 1.0 / (nodes[i] - medium.velocities[k]);
    rhs[k] = out.mean_velocity - medium.velocities[k];
  }
  const Eigen::VectorXd beta = g.colPivHouseholderQr().solve(rhs);
  const Eigen::VectorXd res = g * beta - rhs;
  const double tol = 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff());
  if (!beta.allFinite() || res.cwiseAbs().maxCoeff() > tol)
    throw NumericalError("kernel weight system residual " + std::to_string(res.cwiseAbs().maxCoeff()) +
                         " exceeds " + std::to_string(tol));
  out.weights.assign(beta.data(), beta.data() + beta.size());
  out.weight_residuals.assign(res.data(), res.data() + res.size());
  out.weights_nonnegative = (beta.array() >= 0.0).all();
  return out;
}

UpscaledKernel upscale(const LayeredMedium& medium) {
  const LayeredMedium canonical = canonicalize(medium);
  return solve_kernel_weights(canonical, solve_interface_nodes(canonical));
}

double averaged_heaviside_solution(const LayeredMedium& medium, double x, double t) {
  if (t < 0.0) throw std::invalid_argument("negative time");
  double u = 0.0;
  for (int i = 0; i < medium.size(); ++i)
    if (x - medium.velocities[i] * t >= 0.0) u += medium.widths[i];
  return u;
}

StabilityReport check_continuous_stability(const GridHierarchy& grid, const PermeabilityField& kappa,
                                           const std::array<double, 2>& a_tilde, double beta) {
  kappa.check_matches(grid);
  const int n = grid.fine_n();
  const double h = grid.h();
  StabilityReport r;
  r.values.resize(grid.num_cells());
  r.min_value = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double dx = i + 1 < n ? (kappa.at(i + 1, j) - kappa.at(i, j)) / h : (kappa.at(i, j) - kappa.at(i - 1, j)) / h;
      const double dy = j + 1 < n ? (kappa.at(i, j + 1) - kappa.at(i, j)) / h : (kappa.at(i, j) - kappa.at(i, j - 1)) / h;
      const double value = beta * kappa.at(i, j) + a_tilde[0] * dx + a_tilde[1] * dy;
      const int c = grid.cell(i, j);
      r.values[c] = value;
      r.min_value = std::min(r.min_value, value);
      if (value < 0.0) r.violating_cells.push_back(c);
    }
  }
  return r;
}

LayeredMedium load_medium(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open medium file " + path.string());
  LayeredMedium m;
  std::string line;
  int line_no = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double w = 0.0, a = 0.0;
    std::string extra;
    if (!(ls >> w >> a)) {
      if (!seen_data && m.widths.empty()) {
        seen_data = true;  // header row
        continue;
      }
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected two numbers");
    }
    if (ls >> extra) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": trailing data");
    seen_data = true;
    m.widths.push_back(w);
    m.velocities.push_back(a);
  }
  return m;
}

void save_kernel(const std::filesystem::path& path, const UpscaledKernel& kernel, const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "kind,index,value,residual\n";
  double sum_beta = 0.0;
  for (double b : kernel.weights) sum_beta += b;
  out << "mean_velocity,0," << kernel.mean_velocity << ",0\n";
  out << "variance,0," << kernel.variance << "," << sum_beta - kernel.variance << "\n";
  for (std::size_t i = 0; i < kernel.nodes.size(); ++i)
    out << "node," << i + 1 << "," << kernel.nodes[i] << "," << kernel.node_residuals[i] << "\n";
  for (std::size_t i = 0; i < kernel.weights.size(); ++i) out << "weight," << i + 1 << "," << kernel.weights[i] << ",0\n";
  for (std::size_t k = 0; k < kernel.weight_residuals.size(); ++k)
    out << "layer_equation," << k + 1 << ",0," << kernel.weight_residuals[k] << "\n";
}

} // namespace memcem
