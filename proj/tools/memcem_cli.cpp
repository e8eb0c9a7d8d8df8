// Command line front end: basis construction, single runs, reproduction
// bundles, layered upscaling, the memory cross-check and the stability
// diagnostic.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "memcem/cem_space.hpp"
#include "memcem/csv.hpp"
#include "memcem/errors.hpp"
#include "memcem/experiment.hpp"
#include "memcem/memory_reference.hpp"
#include "memcem/solver.hpp"
#include "memcem/upscaling.hpp"

using namespace memcem;

namespace {

// Config flags shared by every subcommand that builds an ExperimentConfig.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "flat key = value file; flags override it")->check(CLI::ExistingFile);
    for (const auto& key : config_keys()) {
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      std::string names = "--" + key;
      if (dashed != key) names += ",--" + dashed;
      app->add_option(names, values[key], "config field " + key)->group("Config fields");
    }
  }

  ExperimentConfig build(CLI::App* app, ExperimentConfig base) const {
    if (!file.empty()) apply_config_file(base, file);
    for (const auto& key : config_keys())
      if (app->get_option("--" + key)->count() > 0) apply_setting(base, key, values.at(key));
    return base;
  }
};

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void print_constants(const SpaceDecomposition& dec, const SchemeConstants& c, double dt) {
  std::cout << "dim V1 = " << dec.dim_v1() << ", dim V2 = " << dec.dim_v2() << "\n";
  std::cout << "gamma = " << format_double(c.gamma) << "\n";
  std::cout << "lambda_max = " << format_double(c.lambda_max) << "\n";
  std::cout << "dt_max = " << format_double(c.dt_bound) << " (dt = " << format_double(dt) << ")\n";
}

int cmd_basis(CLI::App* app, const ConfigFlags& flags, const std::string& export_dir) {
  const ExperimentConfig cfg = flags.build(app, ExperimentConfig{});
  const ExperimentSetup setup = prepare(cfg);
  const SpaceDecomposition dec = build_decomposition(setup.grid, setup.kappa, cfg.cem());
  const SchemeConstants c = compute_scheme_constants(dec, cfg.beta, setup.fine.stiffness[0], setup.fine.mass);
  print_constants(dec, c, cfg.dt);
  if (!export_dir.empty()) {
    std::filesystem::create_directories(export_dir);
    export_basis(std::filesystem::path(export_dir) / "basis_v1.txt", setup.grid, dec.basis_v1, dec.v1_info);
    export_basis(std::filesystem::path(export_dir) / "basis_v2.txt", setup.grid, dec.basis_v2, dec.v2_info);
  }
  return 0;
}

int cmd_run(CLI::App* app, const ConfigFlags& flags) {
  const ExperimentConfig cfg = flags.build(app, ExperimentConfig{});
  const int steps = cfg.steps();
  const ExperimentSetup setup = prepare(cfg);

  DiscreteSpace space;
  std::optional<SpaceDecomposition> dec;
  SchemeConfig sc;
  sc.scheme = cfg.scheme;
  sc.dt = cfg.dt;
  sc.steps = steps;
  sc.allow_unstable = cfg.allow_unstable;
  if (cfg.space == SpaceKind::Fine) {
    space = fine_space(setup.grid, BoundaryKind::Neumann);
  } else {
    dec = build_decomposition(setup.grid, setup.kappa, cfg.cem());
    space = cfg.space == SpaceKind::FullCem ? full_cem_space(*dec) : implicit_cem_space(*dec);
  }
  if (cfg.scheme == SchemeKind::PartiallyExplicit) {
    if (cfg.space != SpaceKind::FullCem) throw std::invalid_argument("the partially explicit scheme needs space = v");
    if (cfg.inflow_augment) throw std::invalid_argument("the partially explicit scheme needs W = V");
    const SchemeConstants c = compute_scheme_constants(*dec, cfg.beta, setup.fine.stiffness[0], setup.fine.mass);
    sc.dt_bound = c.dt_bound;
    print_constants(*dec, c, cfg.dt);
  }
  const DiscreteSpace w_space = cfg.inflow_augment ? augment_with_inflow(space, setup.grid, cfg.a_tilde) : space;
  const SchemeOperators ops = project_operators(setup.fine, space, w_space, setup.source_load);
  const auto scheme = make_scheme(ops, sc);
  RunOptions options;
  options.steps = steps;
  options.snapshot_stride = cfg.snapshot_stride;
  const RunResult result =
      run(*scheme, ops, space, init_state(initial_coefficients(space, setup.fine.mass, setup.u0), ops), options);

  const std::filesystem::path dir = cfg.outdir;
  std::filesystem::create_directories(dir);
  const std::string tag = "config_hash=" + cfg.hash();
  write_trace_csv(dir / "trace.csv", result.trace,
                  {tag + " space=" + space.name,
                   "units: t model time; E and E_tilde squared energy norms; rel_l2_err dimensionless"});
  for (const auto& s : result.snapshots)
    write_node_snapshot(dir / ("snapshot_n" + std::to_string(s.n) + ".txt"), setup.grid, s.fine_u,
                        tag + " n=" + std::to_string(s.n) + " fine nodal u");
  const auto& last = result.trace.back();
  std::cout << "space = " << space.name << ", dim = " << space.dim() << ", steps = " << steps << "\n";
  std::cout << "E = " << format_double(last.energy) << ", E_tilde = " << format_double(last.split_energy)
            << ", max step residual = " << format_double(result.max_residual) << "\n";
  return 0;
}

int cmd_example(CLI::App* app, const ConfigFlags& flags, int id) {
  const ExperimentConfig cfg = flags.build(app, example_config(id));
  const ExampleBundle b = run_example(cfg, true);
  std::cout << "dim V1 = " << b.dim_v1 << ", dim V2 = " << b.dim_v2 << "\n";
  std::cout << "gamma = " << format_double(b.constants.gamma) << ", dt_max = " << format_double(b.constants.dt_bound)
            << ", dt = " << format_double(cfg.dt) << "\n";
  for (const auto& r : b.runs)
    std::cout << r.name << ": terminal rel L2 error = " << format_double(r.terminal_error)
              << ", max step residual = " << format_double(r.result.max_residual) << "\n";
  std::cout << "max curve gap (implicit_v vs partially_explicit) = " << format_double(b.curve_gap) << "\n";
  std::cout << "outputs in " << cfg.outdir << "\n";
  return 0;
}

int cmd_upscale(const std::string& medium_file, const std::string& out_file) {
  const LayeredMedium medium = load_medium(medium_file);
  const UpscaledKernel k = upscale(medium);
  std::cout << "mean velocity = " << format_double(k.mean_velocity) << "\n";
  std::cout << "variance = " << format_double(k.variance) << "\n";
  double sum = 0.0;
  for (std::size_t i = 0; i < k.nodes.size(); ++i) {
    std::cout << "u" << i + 1 << " = " << format_double(k.nodes[i]) << ", beta" << i + 1 << " = "
              << format_double(k.weights[i]) << "\n";
    sum += k.weights[i];
  }
  std::cout << "sum beta - variance = " << format_double(sum - k.variance) << "\n";
  if (!k.weights_nonnegative) std::cout << "note: some weights are negative\n";
  if (!out_file.empty()) save_kernel(out_file, k, "medium=" + medium_file);
  return 0;
}

int cmd_memcheck(const MemoryCheckConfig& cfg, const std::vector<double>& dts) {
  const auto rows = compare_dememorized(cfg, dts);
  std::cout << "dt,steps,gap,ratio\n";
  for (const auto& r : rows)
    std::cout << format_double(r.dt) << ',' << r.steps << ',' << format_double(r.gap) << ','
              << format_double(r.ratio) << '\n';
  return 0;
}

int cmd_stabcheck(CLI::App* app, const ConfigFlags& flags) {
  const ExperimentConfig cfg = flags.build(app, ExperimentConfig{});
  const ExperimentSetup setup = prepare(cfg);
  const StabilityReport r = check_continuous_stability(setup.grid, setup.kappa, cfg.a_tilde, cfg.beta);
  std::cout << "min beta*kappa + a_tilde.grad(kappa) = " << format_double(r.min_value) << "\n";
  std::cout << "violating cells = " << r.violating_cells.size() << " of " << setup.grid.num_cells() << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale solver for convection-diffusion with memory"};
  app.require_subcommand(1);

  ConfigFlags basis_flags, run_flags, example_flags, stab_flags;
  std::string export_dir, medium_file, kernel_out;
  int example_id = 1;
  MemoryCheckConfig mem;
  std::vector<double> dts{4e-3, 2e-3, 1e-3};

  auto* basis = app.add_subcommand("basis", "build V1 and V2, print dimensions, gamma and the step bound");
  basis_flags.attach(basis);
  basis->add_option("--export", export_dir, "directory for basis files");

  auto* runc = app.add_subcommand("run", "run one scheme in one space");
  run_flags.attach(runc);

  auto* example = app.add_subcommand("example", "reference, V1, V and partially explicit runs with error curves");
  example->add_option("id", example_id, "reproduction run 1, 2 or 3")->required()->check(CLI::IsMember({1, 2, 3}));
  example_flags.attach(example);

  auto* up = app.add_subcommand("upscale", "kernel of a layered medium");
  up->add_option("--medium", medium_file, "CSV with columns m,a")->required()->check(CLI::ExistingFile);
  up->add_option("--out", kernel_out, "kernel CSV");

  auto* memc = app.add_subcommand("memcheck", "direct memory solver against the dememorized system");
  memc->add_option("--coarse-n,--coarse_n", mem.coarse_n);
  memc->add_option("--refine", mem.refine);
  memc->add_option("--kappa", mem.kappa);
  memc->add_option("--beta", mem.beta);
  memc->add_option("--a-x,--a_x", mem.a[0]);
  memc->add_option("--a-y,--a_y", mem.a[1]);
  memc->add_option("--a-tilde-x,--a_tilde_x", mem.a_tilde[0]);
  memc->add_option("--a-tilde-y,--a_tilde_y", mem.a_tilde[1]);
  memc->add_option("--final-time,--final_time", mem.final_time);
  memc->add_option("--dt", dts, "step sizes, largest first")->delimiter(',');

  auto* stab = app.add_subcommand("stabcheck", "cellwise check of beta kappa + a_tilde . grad kappa >= 0");
  stab_flags.attach(stab);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "error: usage: %s\n", one_line(e.what()).c_str());
    return 2;
  }

  try {
    if (*basis) return cmd_basis(basis, basis_flags, export_dir);
    if (*runc) return cmd_run(runc, run_flags);
    if (*example) return cmd_example(example, example_flags, example_id);
    if (*up) return cmd_upscale(medium_file, kernel_out);
    if (*memc) return cmd_memcheck(mem, dts);
    if (*stab) return cmd_stabcheck(stab, stab_flags);
  } catch (const StabilityBoundError& e) {
    std::fprintf(stderr, "error: stability_bound: dt=%s bound=%s: %s\n", format_double(e.dt()).c_str(),
                 format_double(e.bound()).c_str(), one_line(e.what()).c_str());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: numerical: %s\n", one_line(e.what()).c_str());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: invalid_argument: %s\n", one_line(e.what()).c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: runtime: %s\n", one_line(e.what()).c_str());
    return 1;
  }
  return 0;
}
