#include "memcem/fields.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace memcem {

void PermeabilityField::validate() const {
  if (rows <= 0 || cols <= 0)
    throw std::invalid_argument("field dimensions must be positive");
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("field has " + std::to_string(values.size()) + " values, expected " +
                                std::to_string(static_cast<std::size_t>(rows) * cols));
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!(values[k] > 0.0) || !std::isfinite(values[k]))
      throw std::invalid_argument("nonpositive field value at cell (row " + std::to_string(k / cols) +
                                  ", col " + std::to_string(k % cols) + ")");
}

void PermeabilityField::check_matches(const GridHierarchy& grid) const {
  if (rows != grid.fine_n() || cols != grid.fine_n())
    throw std::invalid_argument("field is " + std::to_string(rows) + "x" + std::to_string(cols) +
                                " but the fine grid has " + std::to_string(grid.fine_n()) + " cells per side");
}

PermeabilityField constant_field(const GridHierarchy& grid, double value) {
  PermeabilityField f{grid.fine_n(), grid.fine_n(),
                      std::vector<double>(static_cast<std::size_t>(grid.num_cells()), value)};
  f.validate();
  return f;
}

void KernelSpec::validate() const {
  if (terms.empty()) throw std::invalid_argument("kernel needs at least one term");
  for (const auto& t : terms) {
    if (!(t.beta > 0.0) || !std::isfinite(t.beta))
      throw std::invalid_argument("kernel rate beta must be positive, got " + std::to_string(t.beta));
    t.kappa.validate();
  }
}

namespace {

double parse_number(std::string_view token, int row, int col) {
  double v = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw std::invalid_argument("malformed number '" + std::string(token) + "' at row " + std::to_string(row) +
                                ", col " + std::to_string(col));
  return v;
}

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t k = 0;
  while (k < line.size()) {
    while (k < line.size() && (line[k] == ' ' || line[k] == '\t' || line[k] == ',' || line[k] == '\r')) ++k;
    const std::size_t start = k;
    while (k < line.size() && !(line[k] == ' ' || line[k] == '\t' || line[k] == ',' || line[k] == '\r')) ++k;
    if (k > start) out.push_back(line.substr(start, k - start));
  }
  return out;
}

} // namespace

PermeabilityField load_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open field file " + path.string());
  std::string line;
  std::vector<std::string_view> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_tokens(line);
    if (!header.empty()) break;
  }
  if (header.size() != 2) throw std::invalid_argument("field header must be 'rows cols'");
  PermeabilityField f;
  f.rows = static_cast<int>(parse_number(header[0], 0, 0));
  f.cols = static_cast<int>(parse_number(header[1], 0, 1));
  if (f.rows <= 0 || f.cols <= 0) throw std::invalid_argument("field header dimensions must be positive");
  f.values.reserve(static_cast<std::size_t>(f.rows) * f.cols);
  int row = 0;
  while (row < f.rows && std::getline(in, line)) {
    const auto tokens = split_tokens(line);
    if (tokens.empty()) continue;
    if (static_cast<int>(tokens.size()) != f.cols)
      throw std::invalid_argument("row " + std::to_string(row) + " has " + std::to_string(tokens.size()) +
                                  " values, header says " + std::to_string(f.cols));
    for (int c = 0; c < f.cols; ++c) {
      const double v = parse_number(tokens[c], row, c);
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument("nonpositive value at row " + std::to_string(row) + ", col " +
                                    std::to_string(c));
      f.values.push_back(v);
    }
    ++row;
  }
  if (row != f.rows)
    throw std::invalid_argument("field body has " + std::to_string(row) + " rows, header says " +
                                std::to_string(f.rows));
  while (std::getline(in, line))
    if (!split_tokens(line).empty()) throw std::invalid_argument("field body has more rows than the header");
  return f;
}

void save_field(const std::filesystem::path& path, const PermeabilityField& field, const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write field file " + path.string());
  if (!comment.empty()) out << "# " << comment << '\n';
  out << field.rows << ' ' << field.cols << '\n';
  char buf[64];
  for (int r = 0; r < field.rows; ++r) {
    for (int c = 0; c < field.cols; ++c) {
      auto res = std::to_chars(buf, buf + sizeof buf, field.values[static_cast<std::size_t>(r) * field.cols + c]);
      if (c) out << ' ';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

PermeabilityField synth_channel_field(const GridHierarchy& grid, const ChannelSpec& spec, std::uint64_t seed) {
  if (!(spec.background > 0.0) || !(spec.channel >= spec.background))
    throw std::invalid_argument("channel spec needs 0 < background <= channel value");
  const int n = grid.fine_n();
  PermeabilityField f = constant_field(grid, spec.background);
  auto paint = [&](const CellRect& r) {
    if (r.i0 < 0 || r.j0 < 0 || r.i1 > n || r.j1 > n || r.i0 > r.i1 || r.j0 > r.j1)
      throw std::invalid_argument("channel rectangle [" + std::to_string(r.i0) + "," + std::to_string(r.i1) +
                                  ")x[" + std::to_string(r.j0) + "," + std::to_string(r.j1) +
                                  ") outside the " + std::to_string(n) + "x" + std::to_string(n) + " grid");
    for (int j = r.j0; j < r.j1; ++j)
      for (int i = r.i0; i < r.i1; ++i) f.values[static_cast<std::size_t>(j) * n + i] = spec.channel;
  };
  for (const auto& r : spec.channels) paint(r);
  for (const auto& r : spec.inclusions) paint(r);
  if (spec.random_inclusions > 0) {
    const int s = std::clamp(spec.inclusion_size, 1, n);
    // raw engine output only: the engine sequence is fixed by the standard
    std::mt19937_64 rng(seed);
    const auto span = static_cast<std::uint64_t>(n - s + 1);
    for (int k = 0; k < spec.random_inclusions; ++k) {
      const int i0 = static_cast<int>(rng() % span);
      const int j0 = static_cast<int>(rng() % span);
      paint({i0, i0 + s, j0, j0 + s});
    }
  }
  return f;
}

namespace {

int frac(int n, double x) { return std::clamp(static_cast<int>(std::lround(x * n)), 0, n); }

CellRect horizontal(int n, double y, int width, double x0 = 0.0, double x1 = 1.0) {
  const int j0 = std::clamp(frac(n, y), 0, n - width);
  return {frac(n, x0), frac(n, x1), j0, j0 + width};
}

CellRect vertical(int n, double x, int width, double y0 = 0.0, double y1 = 1.0) {
  const int i0 = std::clamp(frac(n, x), 0, n - width);
  return {i0, i0 + width, frac(n, y0), frac(n, y1)};
}

} // namespace

ChannelSpec example1_channel_spec(const GridHierarchy& grid, double contrast) {
  const int n = grid.fine_n();
  const int w = std::max(1, n / 50);
  ChannelSpec spec;
  spec.background = 1.0;
  spec.channel = contrast;
  spec.channels = {horizontal(n, 0.23, w), horizontal(n, 0.62, w), vertical(n, 0.71, w, 0.1, 0.45)};
  spec.random_inclusions = std::max(1, n / 8);
  spec.inclusion_size = w;
  return spec;
}

ChannelSpec example3_channel_spec(const GridHierarchy& grid, double contrast) {
  const int n = grid.fine_n();
  const int w = std::max(1, n / 50);
  ChannelSpec spec;
  spec.background = 1.0;
  spec.channel = contrast;
  spec.channels = {horizontal(n, 0.12, w),           horizontal(n, 0.31, w, 0.0, 0.8),
                   horizontal(n, 0.47, w),           horizontal(n, 0.66, w, 0.15, 1.0),
                   horizontal(n, 0.86, w),           vertical(n, 0.27, w, 0.12, 0.47),
                   vertical(n, 0.58, w, 0.47, 0.86), vertical(n, 0.83, w, 0.0, 0.31)};
  spec.random_inclusions = std::max(1, n / 5);
  spec.inclusion_size = w;
  return spec;
}

FieldStats field_stats(const PermeabilityField& field) {
  field.validate();
  const auto [lo, hi] = std::minmax_element(field.values.begin(), field.values.end());
  FieldStats s;
  s.min = *lo;
  s.max = *hi;
  s.contrast = s.max / s.min;
  const auto above = std::count_if(field.values.begin(), field.values.end(), [&](double v) { return v > s.min; });
  s.channel_fraction = static_cast<double>(above) / static_cast<double>(field.values.size());
  return s;
}

} // namespace memcem
