#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "memcem/assembly.hpp"
#include "memcem/grid.hpp"
#include "memcem/solver.hpp"

namespace memcem {

/// Shortest round-trip decimal form, fixed notation for magnitudes in
/// [1e-5, 1e16); NaN becomes an empty string.
std::string format_double(double x);

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

/// Columns n,t,E,E_tilde,rel_l2_err under one '#' comment line per entry of
/// `comments`. An error that was not computed is left empty.
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace,
                     const std::vector<std::string>& comments);

/// Fine nodal values in the field grid format, (fine_n + 1) rows bottom to top.
void write_node_snapshot(const std::filesystem::path& path, const GridHierarchy& grid, const Vector& values,
                         const std::string& comment);

} // namespace memcem
