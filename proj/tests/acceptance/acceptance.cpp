// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "memcem/cem_space.hpp"
#include "memcem/experiment.hpp"
#include "memcem/memory_reference.hpp"
#include "memcem/solver.hpp"
#include "memcem/upscaling.hpp"
#include "test_util.hpp"

using namespace memcem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

char buf[512];

template <class... Args>
std::string fmt(const char* f, Args... args) {
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

KernelSpec single_kernel(const PermeabilityField& kappa, double beta) {
  KernelSpec k;
  k.terms.push_back({kappa, beta});
  return k;
}

double cross_energy(const SpaceDecomposition& dec, const SparseMatrix& a) {
  const Matrix g12 = gram(dec.basis_v1, a, dec.basis_v2);
  const Vector d1 = gram(dec.basis_v1, a, dec.basis_v1).diagonal();
  const Vector d2 = gram(dec.basis_v2, a, dec.basis_v2).diagonal();
  double worst = 0.0;
  for (int i = 0; i < g12.rows(); ++i)
    for (int j = 0; j < g12.cols(); ++j)
      worst = std::max(worst, std::abs(g12(i, j)) / std::sqrt(d1[i] * d2[j]));
  return worst;
}

CemParameters saturating(int oversampling = 4) {
  CemParameters p;
  p.aux_per_element = 2;
  p.explicit_per_element = 2;
  p.oversampling = oversampling;
  return p;
}

Outcome implicit_energy() {
  const GridHierarchy g(4, 5);
  const FineOperators fine =
      assemble_fine_operators(g, single_kernel(test::random_field(g, 1e4, 1), 1.0), {0, 0}, {0, 0});
  const DiscreteSpace space = fine_space(g, BoundaryKind::Dirichlet);
  const SchemeOperators ops = project_operators(fine, space, space);
  const ImplicitScheme scheme(ops, 1e-3);
  CoupledState s = init_state(test::random_vector(ops.dim_u(), 2), ops);
  double e = energy(s, ops).energy, worst = -INFINITY;
  for (int n = 0; n < 200; ++n) {
    s = scheme.step(s);
    const double next = energy(s, ops).energy;
    worst = std::max(worst, next / e - 1);
    e = next;
  }
  return {worst <= 1e-12, fmt("max E^{n+1}/E^n - 1 = %.3e over 200 steps", worst)};
}

Outcome split_energy() {
  const GridHierarchy g(5, 8);
  double worst = -INFINITY;
  for (unsigned seed = 1; seed <= 10; ++seed) {
    const PermeabilityField kappa = test::random_field(g, 1e4, 100 + seed);
    const FineOperators fine = assemble_fine_operators(g, single_kernel(kappa, 1.0), {0, 0}, {0, 0});
    const SpaceDecomposition dec = build_decomposition(g, kappa, saturating());
    const SchemeConstants c = compute_scheme_constants(dec, 1.0, fine.stiffness[0], fine.mass);
    const DiscreteSpace space = full_cem_space(dec);
    const SchemeOperators ops = project_operators(fine, space, space);
    SchemeConfig cfg;
    cfg.scheme = SchemeKind::PartiallyExplicit;
    cfg.dt = c.dt_bound;
    cfg.dt_bound = c.dt_bound;
    const PartiallyExplicitScheme scheme(ops, cfg);
    CoupledState s =
        init_state(initial_coefficients(space, fine.mass, test::random_vector(g.num_nodes(), seed)), ops);
    double e = energy(s, ops).split_energy;
    for (int n = 0; n < 200; ++n) {
      s = scheme.step(s);
      const double next = energy(s, ops).split_energy;
      worst = std::max(worst, next / e - 1);
      e = next;
    }
  }
  return {worst <= 1e-10, fmt("max split-energy growth %.3e over 10 seeds x 200 steps at dt = bound", worst)};
}

Outcome memory_equivalence() {
  MemoryCheckConfig cfg;
  const auto rows = compare_dememorized(cfg, {4e-3, 2e-3, 1e-3});
  const bool ok = rows[1].ratio >= 1.6 && rows[1].ratio <= 2.4 && rows[2].ratio >= 1.6 && rows[2].ratio <= 2.4;
  return {ok, fmt("gaps %.4e %.4e %.4e, ratios %.3f %.3f", rows[0].gap, rows[1].gap, rows[2].gap, rows[1].ratio,
                  rows[2].ratio)};
}

Outcome upscaling() {
  const UpscaledKernel two = upscale({{0.5, 0.5}, {0.0, 1.0}});
  bool ok = std::abs(two.mean_velocity - 0.5) <= 1e-12 && std::abs(two.nodes[0] - 0.5) <= 1e-12 &&
            std::abs(two.weights[0] - 0.25) <= 1e-12;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> count(1, 6);
  std::uniform_real_distribution<double> width(0.05, 1.0), velocity(-1.0, 1.0);
  double worst = 0.0;
  int interlace_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    LayeredMedium m;
    const int n = count(rng);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      m.widths.push_back(width(rng));
      m.velocities.push_back(velocity(rng));
      total += m.widths.back();
    }
    for (double& w : m.widths) w /= total;
    const LayeredMedium c = canonicalize(m);
    const UpscaledKernel k = upscale(m);
    double sum = 0.0;
    for (int i = 0; i + 1 < c.size(); ++i) {
      if (!(c.velocities[i] < k.nodes[i] && k.nodes[i] < c.velocities[i + 1])) ++interlace_failures;
      sum += k.weights[i];
    }
    worst = std::max(worst, std::abs(sum - k.variance));
  }
  ok = ok && interlace_failures == 0 && worst <= 1e-10;
  return {ok, fmt("two-layer a=%.15g u1=%.15g beta1=%.15g; 1000 media: %d interlacing failures, max |sum beta - var| "
                  "= %.3e",
                  two.mean_velocity, two.nodes[0], two.weights[0], interlace_failures, worst)};
}

Outcome space_identities() {
  const GridHierarchy g(5, 8);
  const PermeabilityField kappa = test::random_field(g, 1e4, 5);
  const SparseMatrix a = assemble_stiffness(g, kappa.values);
  const SparseMatrix m = assemble_mass(g);
  const SpaceDecomposition dec = build_decomposition(g, kappa, saturating());
  const double phi = test::max_abs(Matrix(Matrix(dec.aux.s_psi.transpose() * dec.basis_v1) -
                                             Matrix::Identity(dec.dim_v1(), dec.aux.size())));
  const double zeta = test::max_abs(Matrix(dec.aux.s_psi.transpose() * dec.basis_v2));
  const double cross = cross_energy(dec, a);
  const double gamma = compute_gamma(dec.basis_v1, dec.basis_v2, m);
  double e[3];
  for (int k = 0; k < 3; ++k) e[k] = cross_energy(build_decomposition(g, kappa, saturating(k + 2)), a);
  const bool ok = phi <= 1e-8 && zeta <= 1e-8 && cross <= 1e-8 && gamma < 1 && e[0] > e[1] && e[1] > e[2];
  return {ok, fmt("|Pi phi - psi| = %.2e, |Pi zeta| = %.2e, cross = %.2e, gamma = %.4f, cross(m=2,3,4) = %.2e %.2e %.2e",
                  phi, zeta, cross, gamma, e[0], e[1], e[2])};
}

ExampleBundle example_bundle;

Outcome example_curves() {
  ExperimentConfig cfg = example_config(1);
  cfg.outdir = "acceptance_example1";
  example_bundle = run_example(cfg, true);
  const double v1 = example_bundle.runs[1].terminal_error;
  const double v = example_bundle.runs[2].terminal_error;
  const double pe = example_bundle.runs[3].terminal_error;
  const bool ok = example_bundle.curve_gap <= 0.01 && v < v1 && pe < v1;
  return {ok, fmt("curve gap %.4f; terminal errors V1 %.4f, V %.4f, partially explicit %.4f", example_bundle.curve_gap,
                  v1, v, pe)};
}

Outcome step_residuals() {
  if (example_bundle.runs.empty()) return {false, "criterion 6 runs missing"};
  double worst = 0.0;
  std::string detail;
  for (const auto& r : example_bundle.runs) {
    worst = std::max(worst, r.result.max_residual);
    detail += (detail.empty() ? "" : ", ") + fmt("%s %.2e", r.name.c_str(), r.result.max_residual);
  }
  return {worst <= 1e-12, "max step residual per run: " + detail};
}

Outcome degeneracy() {
  const GridHierarchy g(5, 8);
  const PermeabilityField kappa = synth_channel_field(g, example1_channel_spec(g), 1);
  const FineOperators fine = assemble_fine_operators(g, single_kernel(kappa, 1.0), {0.1, 0.0}, {0.05, 0.0});
  CemParameters p;
  p.explicit_per_element = 0;
  const SpaceDecomposition dec = build_decomposition(g, kappa, p);
  const DiscreteSpace space = full_cem_space(dec);
  const SchemeOperators ops = project_operators(fine, space, space);
  SchemeConfig cfg;
  cfg.scheme = SchemeKind::PartiallyExplicit;
  cfg.dt = 5e-4;
  cfg.dt_bound = compute_scheme_constants(dec, 1.0, fine.stiffness[0], fine.mass).dt_bound;
  const PartiallyExplicitScheme pe(ops, cfg);
  const ImplicitScheme im(ops, cfg.dt);
  CoupledState a = init_state(initial_coefficients(space, fine.mass, test::random_vector(g.num_nodes(), 3)), ops);
  CoupledState b = a;
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    a = pe.step(a);
    b = im.step(b);
    const double scale = std::max(b.u.cwiseAbs().maxCoeff(), b.v[0].cwiseAbs().maxCoeff());
    worst = std::max(worst, std::max((a.u - b.u).cwiseAbs().maxCoeff(), (a.v[0] - b.v[0]).cwiseAbs().maxCoeff()) / scale);
  }
  return {dec.dim_v2() == 0 && worst <= 1e-12,
          fmt("dim V2 = %d, max per-step relative difference %.3e over 100 steps", dec.dim_v2(), worst)};
}

} // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"1 implicit energy stability", implicit_energy},
      {"2 partially explicit split-energy stability", split_energy},
      {"3 dememorization equivalence", memory_equivalence},
      {"4 layered upscaling exactness", upscaling},
      {"5 space-construction identities", space_identities},
      {"6 example 1 scheme relationships", example_curves},
      {"7 step-residual contract", step_residuals},
      {"8 empty explicit space degeneracy", degeneracy},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
