#include "memcem/experiment.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "memcem/csv.hpp"
#include "memcem/errors.hpp"

namespace memcem {

namespace {

double parse_double(const std::string& key, const std::string& value) {
  double x = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), x);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size() || !std::isfinite(x))
    throw std::invalid_argument("config key '" + key + "': expected a number, got '" + value + "'");
  return x;
}

long long parse_integer(const std::string& key, const std::string& value) {
  long long x = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), x);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw std::invalid_argument("config key '" + key + "': expected an integer, got '" + value + "'");
  return x;
}

int parse_int(const std::string& key, const std::string& value) {
  const long long x = parse_integer(key, value);
  if (x < -(1LL << 31) || x >= (1LL << 31)) throw std::invalid_argument("config key '" + key + "': out of range");
  return static_cast<int>(x);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw std::invalid_argument("config key '" + key + "': expected true or false, got '" + value + "'");
}

[[noreturn]] void bad_choice(const std::string& key, const std::string& value, const std::string& choices) {
  throw std::invalid_argument("config key '" + key + "': '" + value + "' is not one of " + choices);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double product_sine(double x, double y) { return std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y); }

std::string value_of(const ExperimentConfig& c, const std::string& key) {
  if (key == "coarse_n") return std::to_string(c.coarse_n);
  if (key == "refine") return std::to_string(c.refine);
  if (key == "field_file") return c.field_file;
  if (key == "field_variant") return std::to_string(c.field_variant);
  if (key == "contrast") return format_double(c.contrast);
  if (key == "seed") return std::to_string(c.seed);
  if (key == "a_x") return format_double(c.a[0]);
  if (key == "a_y") return format_double(c.a[1]);
  if (key == "a_tilde_x") return format_double(c.a_tilde[0]);
  if (key == "a_tilde_y") return format_double(c.a_tilde[1]);
  if (key == "beta") return format_double(c.beta);
  if (key == "dt") return format_double(c.dt);
  if (key == "final_time") return format_double(c.final_time);
  if (key == "aux_per_element") return std::to_string(c.aux_per_element);
  if (key == "explicit_per_element") return std::to_string(c.explicit_per_element);
  if (key == "oversampling") return std::to_string(c.oversampling);
  if (key == "s_weight") return c.weight == SWeight::KappaPouGradient ? "pou_gradient" : "kappa_over_h2";
  if (key == "u0") return c.u0 == InitialCondition::ProductSine ? "product_sine" : "zero";
  if (key == "g0") return c.g0 == SourceKind::ProductSine ? "product_sine" : "none";
  if (key == "scheme") return c.scheme == SchemeKind::Implicit ? "implicit" : "partially_explicit";
  if (key == "space") return c.space == SpaceKind::Fine ? "fine" : c.space == SpaceKind::ImplicitCem ? "v1" : "v";
  if (key == "allow_unstable") return c.allow_unstable ? "true" : "false";
  if (key == "inflow_augment") return c.inflow_augment ? "true" : "false";
  if (key == "snapshot_stride") return std::to_string(c.snapshot_stride);
  if (key == "outdir") return c.outdir;
  throw std::invalid_argument("unknown config key '" + key + "'");
}

} // namespace

int ExperimentConfig::steps() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(final_time >= 0.0)) throw std::invalid_argument("final_time must be nonnegative");
  const double exact = final_time / dt;
  const long long n = std::llround(exact);
  if (std::abs(exact - static_cast<double>(n)) > 1e-9 * std::max(1.0, exact))
    throw std::invalid_argument("dt " + format_double(dt) + " does not divide final_time " + format_double(final_time));
  if (n > 1000000) throw std::invalid_argument("more than 10^6 time steps");
  return static_cast<int>(n);
}

CemParameters ExperimentConfig::cem() const {
  CemParameters p;
  p.aux_per_element = aux_per_element;
  p.explicit_per_element = explicit_per_element;
  p.oversampling = oversampling;
  p.weight = weight;
  return p;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "coarse_n",  "refine",    "field_file", "field_variant",   "contrast",        "seed",
      "a_x",       "a_y",       "a_tilde_x",  "a_tilde_y",       "beta",            "dt",
      "final_time", "aux_per_element", "explicit_per_element", "oversampling", "s_weight", "u0",
      "g0",        "scheme",    "space",      "allow_unstable",  "inflow_augment",  "snapshot_stride",
      "outdir"};
  return keys;
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& key : config_keys()) {
    if (key == "outdir") continue;  // where results go does not change them
    out += key + " = " + value_of(*this, key) + "\n";
  }
  return out;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(canonical()); }

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "coarse_n")
    c.coarse_n = parse_int(key, value);
  else if (key == "refine")
    c.refine = parse_int(key, value);
  else if (key == "field_file")
    c.field_file = value;
  else if (key == "field_variant") {
    c.field_variant = parse_int(key, value);
    if (c.field_variant != 1 && c.field_variant != 3) bad_choice(key, value, "{1, 3}");
  } else if (key == "contrast")
    c.contrast = parse_double(key, value);
  else if (key == "seed") {
    const long long s = parse_integer(key, value);
    if (s < 0) throw std::invalid_argument("config key 'seed': must be nonnegative");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "a_x")
    c.a[0] = parse_double(key, value);
  else if (key == "a_y")
    c.a[1] = parse_double(key, value);
  else if (key == "a_tilde_x")
    c.a_tilde[0] = parse_double(key, value);
  else if (key == "a_tilde_y")
    c.a_tilde[1] = parse_double(key, value);
  else if (key == "beta")
    c.beta = parse_double(key, value);
  else if (key == "dt")
    c.dt = parse_double(key, value);
  else if (key == "final_time")
    c.final_time = parse_double(key, value);
  else if (key == "aux_per_element")
    c.aux_per_element = parse_int(key, value);
  else if (key == "explicit_per_element")
    c.explicit_per_element = parse_int(key, value);
  else if (key == "oversampling")
    c.oversampling = parse_int(key, value);
  else if (key == "s_weight") {
    if (value == "pou_gradient")
      c.weight = SWeight::KappaPouGradient;
    else if (value == "kappa_over_h2")
      c.weight = SWeight::KappaOverH2;
    else
      bad_choice(key, value, "{pou_gradient, kappa_over_h2}");
  } else if (key == "u0") {
    if (value == "product_sine")
      c.u0 = InitialCondition::ProductSine;
    else if (value == "zero")
      c.u0 = InitialCondition::Zero;
    else
      bad_choice(key, value, "{product_sine, zero}");
  } else if (key == "g0") {
    if (value == "product_sine")
      c.g0 = SourceKind::ProductSine;
    else if (value == "none")
      c.g0 = SourceKind::None;
    else
      bad_choice(key, value, "{none, product_sine}");
  } else if (key == "scheme") {
    if (value == "implicit")
      c.scheme = SchemeKind::Implicit;
    else if (value == "partially_explicit")
      c.scheme = SchemeKind::PartiallyExplicit;
    else
      bad_choice(key, value, "{implicit, partially_explicit}");
  } else if (key == "space") {
    if (value == "fine")
      c.space = SpaceKind::Fine;
    else if (value == "v1")
      c.space = SpaceKind::ImplicitCem;
    else if (value == "v")
      c.space = SpaceKind::FullCem;
    else
      bad_choice(key, value, "{fine, v1, v}");
  } else if (key == "allow_unstable")
    c.allow_unstable = parse_bool(key, value);
  else if (key == "inflow_augment")
    c.inflow_augment = parse_bool(key, value);
  else if (key == "snapshot_stride")
    c.snapshot_stride = parse_int(key, value);
  else if (key == "outdir")
    c.outdir = value;
  else
    throw std::invalid_argument("unknown config key '" + key + "'");
}

void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      apply_setting(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

ExperimentConfig example_config(int id) {
  ExperimentConfig c;
  // The reproduction step size lies above the provable split-scheme bound.
  c.allow_unstable = true;
  switch (id) {
  case 1:
    break;
  case 2:
    c.u0 = InitialCondition::Zero;
    c.g0 = SourceKind::ProductSine;
    break;
  case 3:
    c.u0 = InitialCondition::Zero;
    c.g0 = SourceKind::ProductSine;
    c.field_variant = 3;
    break;
  default:
    throw std::invalid_argument("example id must be 1, 2 or 3");
  }
  return c;
}

ExperimentSetup prepare(const ExperimentConfig& config) {
  if (!(config.beta > 0.0)) throw std::invalid_argument("beta must be positive");
  GridHierarchy grid = build_grids(config.coarse_n, config.refine);
  PermeabilityField kappa;
  if (!config.field_file.empty()) {
    kappa = load_field(config.field_file);
    kappa.check_matches(grid);
  } else {
    const ChannelSpec spec = config.field_variant == 3 ? example3_channel_spec(grid, config.contrast)
                                                        : example1_channel_spec(grid, config.contrast);
    kappa = synth_channel_field(grid, spec, config.seed);
  }
  KernelSpec kernel;
  kernel.terms.push_back({kappa, config.beta});
  FineOperators fine = assemble_fine_operators(grid, kernel, config.a, config.a_tilde);
  Vector u0 = config.u0 == InitialCondition::ProductSine ? nodal_interpolant(grid, product_sine)
                                                         : Vector::Zero(grid.num_nodes());
  Vector load;
  if (config.g0 == SourceKind::ProductSine) load = load_vector(grid, product_sine);
  return ExperimentSetup{std::move(grid), std::move(kappa), std::move(kernel), std::move(fine), std::move(u0),
                         std::move(load)};
}

ExampleBundle run_example(const ExperimentConfig& config, bool write) {
  if (config.inflow_augment) throw std::invalid_argument("example runs use W = V; unset inflow_augment");
  const int steps = config.steps();
  const ExperimentSetup setup = prepare(config);
  const GridHierarchy& grid = setup.grid;
  const double dt = config.dt;

  ExampleBundle bundle;
  RunOptions options;
  options.steps = steps;
  options.snapshot_stride = config.snapshot_stride;

  const DiscreteSpace ref_space = fine_space(grid, BoundaryKind::Neumann);
  const SchemeOperators ref_ops = project_operators(setup.fine, ref_space, ref_space, setup.source_load);
  const ImplicitScheme ref_scheme(ref_ops, dt);
  RunOptions ref_options = options;
  ref_options.keep_trajectory = true;
  SchemeRun reference{"reference", run(ref_scheme, ref_ops, ref_space,
                                       init_state(initial_coefficients(ref_space, setup.fine.mass, setup.u0), ref_ops),
                                       ref_options),
                      0.0};
  const std::vector<Vector> trajectory = std::move(reference.result.trajectory);
  reference.result.trajectory.clear();

  const SpaceDecomposition dec = build_decomposition(grid, setup.kappa, config.cem());
  bundle.dim_v1 = dec.dim_v1();
  bundle.dim_v2 = dec.dim_v2();
  bundle.constants = compute_scheme_constants(dec, config.beta, setup.fine.stiffness[0], setup.fine.mass);

  const DiscreteSpace v_space = full_cem_space(dec);
  const DiscreteSpace v1_space = implicit_cem_space(dec);
  const SchemeOperators v_ops = project_operators(setup.fine, v_space, v_space, setup.source_load);
  const SchemeOperators v1_ops = leading_block(v_ops, dec.dim_v1());

  options.reference = &trajectory;
  options.fine_mass = &setup.fine.mass;
  auto tracked = [&](const std::string& name, const TimeScheme& scheme, const SchemeOperators& ops,
                     const DiscreteSpace& space) {
    SchemeRun r{name, run(scheme, ops, space, init_state(initial_coefficients(space, setup.fine.mass, setup.u0), ops),
                          options),
                0.0};
    r.terminal_error = r.result.trace.back().rel_l2_error;
    return r;
  };

  bundle.runs.push_back(std::move(reference));
  bundle.runs.push_back(tracked("implicit_v1", ImplicitScheme(v1_ops, dt), v1_ops, v1_space));
  bundle.runs.push_back(tracked("implicit_v", ImplicitScheme(v_ops, dt), v_ops, v_space));
  SchemeConfig split;
  split.scheme = SchemeKind::PartiallyExplicit;
  split.dt = dt;
  split.steps = steps;
  split.dt_bound = bundle.constants.dt_bound;
  split.allow_unstable = config.allow_unstable;
  bundle.runs.push_back(tracked("partially_explicit", PartiallyExplicitScheme(v_ops, split), v_ops, v_space));

  const auto& full = bundle.runs[2].result.trace;
  const auto& pe = bundle.runs[3].result.trace;
  for (std::size_t n = 0; n < full.size(); ++n)
    if (!std::isnan(full[n].rel_l2_error))
      bundle.curve_gap = std::max(bundle.curve_gap, std::abs(full[n].rel_l2_error - pe[n].rel_l2_error));

  if (write) {
    const std::filesystem::path dir = config.outdir;
    std::filesystem::create_directories(dir);
    const std::string tag = "config_hash=" + config.hash();
    save_field(dir / "permeability.txt", setup.kappa, tag + " permeability per fine cell");
    for (const auto& r : bundle.runs) {
      write_trace_csv(dir / ("trace_" + r.name + ".csv"), r.result.trace,
                      {tag + " scheme=" + r.name,
                       "units: t model time; E and E_tilde squared energy norms; rel_l2_err dimensionless"});
      for (const auto& s : r.result.snapshots)
        write_node_snapshot(dir / ("snapshot_" + r.name + "_n" + std::to_string(s.n) + ".txt"), grid, s.fine_u,
                            tag + " scheme=" + r.name + " n=" + std::to_string(s.n) + " fine nodal u");
    }
    std::ofstream out(dir / "summary.csv");
    if (!out) throw std::runtime_error("cannot write summary in " + dir.string());
    out << "# " << tag << "\n";
    out << "# dim_v1=" << bundle.dim_v1 << " dim_v2=" << bundle.dim_v2
        << " gamma=" << format_double(bundle.constants.gamma)
        << " lambda_max=" << format_double(bundle.constants.lambda_max)
        << " dt_bound=" << format_double(bundle.constants.dt_bound) << " dt=" << format_double(dt)
        << " curve_gap=" << format_double(bundle.curve_gap) << "\n";
    out << "scheme,terminal_rel_l2_err,max_step_residual\n";
    for (const auto& r : bundle.runs)
      out << r.name << ',' << format_double(r.terminal_error) << ',' << format_double(r.result.max_residual) << '\n';
  }
  return bundle;
}

} // namespace memcem
