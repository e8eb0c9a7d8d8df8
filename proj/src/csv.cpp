#include "memcem/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "memcem/fields.hpp"

namespace memcem {

std::string format_double(double x) {
  if (std::isnan(x)) return {};
  char buf[400];
  const double a = std::abs(x);
  const bool fixed = a == 0.0 || (a >= 1e-5 && a < 1e16);
  const auto res = fixed ? std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed)
                         : std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific);
  return std::string(buf, res.ptr);
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static const char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = digits[h & 15u];
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace,
                     const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "n,t,E,E_tilde,rel_l2_err\n";
  for (const auto& r : trace)
    out << r.n << ',' << format_double(r.t) << ',' << format_double(r.energy) << ',' << format_double(r.split_energy)
        << ',' << format_double(r.rel_l2_error) << '\n';
}

void write_node_snapshot(const std::filesystem::path& path, const GridHierarchy& grid, const Vector& values,
                         const std::string& comment) {
  if (values.size() != grid.num_nodes()) throw std::invalid_argument("snapshot does not match the fine grid");
  PermeabilityField f;
  f.rows = grid.fine_n() + 1;
  f.cols = grid.fine_n() + 1;
  f.values.assign(values.data(), values.data() + values.size());
  save_field(path, f, comment);
}

} // namespace memcem
