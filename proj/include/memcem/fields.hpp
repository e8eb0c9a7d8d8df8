#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "memcem/grid.hpp"

namespace memcem {

/// Positive cellwise-constant scalar field on the fine grid, row-major with
/// row r holding the cells of fine row j = r (bottom to top).
struct PermeabilityField {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * cols + i]; }
  /// Throws unless every entry is finite and strictly positive.
  void validate() const;
  /// Throws unless the field matches the fine grid of `grid`.
  void check_matches(const GridHierarchy& grid) const;
};

PermeabilityField constant_field(const GridHierarchy& grid, double value);

/// One memory kernel term kappa_i(x) exp(-beta_i (t - s)).
struct KernelTerm {
  PermeabilityField kappa;
  double beta = 1.0;
};

struct KernelSpec {
  std::vector<KernelTerm> terms;
  int size() const { return static_cast<int>(terms.size()); }
  void validate() const;
};

/// Axis-aligned block of fine cells, [i0, i1) x [j0, j1).
struct CellRect {
  int i0 = 0, i1 = 0, j0 = 0, j1 = 0;
};

struct ChannelSpec {
  double background = 1.0;
  double channel = 1.0e4;
  std::vector<CellRect> channels;
  std::vector<CellRect> inclusions;
  /// Additional square inclusions placed from the seed.
  int random_inclusions = 0;
  int inclusion_size = 2;
};

/// Reads the "rows cols" header plus `rows` lines of `cols` values. Lines
/// starting with '#' before the header are skipped.
PermeabilityField load_field(const std::filesystem::path& path);
/// Writes shortest round-trip decimal representations.
void save_field(const std::filesystem::path& path, const PermeabilityField& field,
                const std::string& comment = {});

PermeabilityField synth_channel_field(const GridHierarchy& grid, const ChannelSpec& spec, std::uint64_t seed);

/// Stand-in for the single-channel-family medium of the first two reproduction runs.
ChannelSpec example1_channel_spec(const GridHierarchy& grid, double contrast = 1.0e4);
/// Stand-in with more channels for the third run.
ChannelSpec example3_channel_spec(const GridHierarchy& grid, double contrast = 1.0e4);

struct FieldStats {
  double min = 0.0;
  double max = 0.0;
  double contrast = 1.0;
  /// Fraction of cells whose value exceeds the minimum.
  double channel_fraction = 0.0;
};

FieldStats field_stats(const PermeabilityField& field);

} // namespace memcem
