#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "memcem/cem_space.hpp"
#include "memcem/fields.hpp"
#include "memcem/grid.hpp"
#include "memcem/solver.hpp"

namespace memcem {

enum class InitialCondition { ProductSine, Zero };
enum class SourceKind { None, ProductSine };
enum class SpaceKind { Fine, ImplicitCem, FullCem };

/// Every setting of a run. Defaults reproduce the first channel experiment.
struct ExperimentConfig {
  int coarse_n = 10;
  int refine = 10;
  std::string field_file;      ///< empty: synthetic channel field
  int field_variant = 1;       ///< 1 or 3, which synthetic stand-in
  double contrast = 1.0e4;
  std::uint64_t seed = 1;
  Velocity a{0.1, 0.0};
  Velocity a_tilde{0.05, 0.0};
  double beta = 1.0;
  double dt = 5.0e-4;
  double final_time = 0.05;
  int aux_per_element = 3;
  int explicit_per_element = 3;
  int oversampling = 4;
  SWeight weight = SWeight::KappaPouGradient;
  InitialCondition u0 = InitialCondition::ProductSine;
  SourceKind g0 = SourceKind::None;
  SchemeKind scheme = SchemeKind::PartiallyExplicit;
  SpaceKind space = SpaceKind::FullCem;
  bool allow_unstable = false;
  bool inflow_augment = false;
  int snapshot_stride = 0;
  std::string outdir = "out";

  /// Number of steps; throws unless dt divides final_time.
  int steps() const;
  CemParameters cem() const;
  /// "key = value" lines in a fixed order.
  std::string canonical() const;
  std::string hash() const;
};

/// Names accepted by apply_setting, in canonical order.
const std::vector<std::string>& config_keys();
/// Throws std::invalid_argument naming the key for unknown keys or bad values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
/// Flat "key = value" file with '#' comments, applied on top of `config`.
void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path);

/// Defaults adjusted for reproduction run 1, 2 or 3.
ExperimentConfig example_config(int id);

/// Shared inputs of every run of one configuration.
struct ExperimentSetup {
  GridHierarchy grid;
  PermeabilityField kappa;
  KernelSpec kernel;
  FineOperators fine;
  Vector u0;           ///< fine nodal
  Vector source_load;  ///< fine load vector, empty without source
};

ExperimentSetup prepare(const ExperimentConfig& config);

struct SchemeRun {
  std::string name;
  RunResult result;
  double terminal_error = 0.0;
};

struct ExampleBundle {
  int dim_v1 = 0;
  int dim_v2 = 0;
  SchemeConstants constants;
  std::vector<SchemeRun> runs;  ///< reference, implicit V1, implicit V, partially explicit
  /// max over time of |err(implicit V) - err(partially explicit)|
  double curve_gap = 0.0;
};

/// Reference, V1 implicit, V implicit and partially explicit runs sharing one
/// setup and one basis construction. Writes CSVs when `write` is set.
ExampleBundle run_example(const ExperimentConfig& config, bool write);

} // namespace memcem
