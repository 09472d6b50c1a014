#include "qvi/grid.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace qvi {

using json = nlohmann::ordered_json;

Grid::Grid(std::vector<Axis> axes, int t_count, double T)
    : space(std::move(axes)), time_count(t_count), horizon(T) {
  if (space.empty()) throw ConfigError("grid needs at least one spatial axis");
  for (const Axis& a : space) {
    if (a.count < 3) throw ConfigError("grid axis needs at least 3 nodes");
    if (!(a.hi > a.lo)) throw ConfigError("grid axis has empty extent");
  }
  if (time_count < 2) throw ConfigError("grid needs at least 2 time slices");
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
}

size_t Grid::node_count() const {
  size_t n = 1;
  for (const Axis& a : space) n *= static_cast<size_t>(a.count);
  return n;
}

size_t Grid::flat_index(const std::vector<int>& multi) const {
  size_t flat = 0;
  for (int a = 0; a < dim(); ++a) flat = flat * space[a].count + multi[a];
  return flat;
}

std::vector<int> Grid::multi_index(size_t flat) const {
  std::vector<int> multi(dim());
  for (int a = dim() - 1; a >= 0; --a) {
    multi[a] = static_cast<int>(flat % space[a].count);
    flat /= space[a].count;
  }
  return multi;
}

void Grid::node_point(size_t flat, double* out) const {
  for (int a = dim() - 1; a >= 0; --a) {
    int i = static_cast<int>(flat % space[a].count);
    flat /= space[a].count;
    out[a] = space[a].coord(i);
  }
}

std::vector<double> Grid::node_point(size_t flat) const {
  std::vector<double> x(dim());
  node_point(flat, x.data());
  return x;
}

bool Grid::inside(const double* x) const {
  for (int a = 0; a < dim(); ++a)
    if (x[a] < space[a].lo || x[a] > space[a].hi) return false;
  return true;
}

void Grid::clamp(const double* x, double* out) const {
  for (int a = 0; a < dim(); ++a)
    out[a] = std::fmin(space[a].hi, std::fmax(space[a].lo, x[a]));
}

std::vector<int> Grid::nearest_node(const double* x) const {
  std::vector<int> multi(dim());
  for (int a = 0; a < dim(); ++a) {
    int i = static_cast<int>(std::lround((x[a] - space[a].lo) / space[a].h()));
    if (i < 0) i = 0;
    if (i >= space[a].count) i = space[a].count - 1;
    multi[a] = i;
  }
  return multi;
}

bool Grid::on_boundary(const std::vector<int>& multi) const {
  for (int a = 0; a < dim(); ++a)
    if (multi[a] == 0 || multi[a] == space[a].count - 1) return true;
  return false;
}

double Grid::boundary_distance(const double* x) const {
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < dim(); ++a) {
    d = std::fmin(d, x[a] - space[a].lo);
    d = std::fmin(d, space[a].hi - x[a]);
  }
  return d;
}

bool Grid::same_box(const Grid& other) const {
  if (dim() != other.dim()) return false;
  for (int a = 0; a < dim(); ++a)
    if (space[a].lo != other.space[a].lo || space[a].hi != other.space[a].hi ||
        space[a].count != other.space[a].count)
      return false;
  return true;
}

double Field::interpolate(const double* x) const {
  int n = grid.dim();
  int base[8];
  double frac[8];
  if (n > 8) throw ConfigError("interpolation supports dim <= 8");
  for (int a = 0; a < n; ++a) {
    const Axis& ax = grid.space[a];
    double u = (x[a] - ax.lo) / ax.h();
    int i = static_cast<int>(std::floor(u));
    if (i < 0) i = 0;
    if (i > ax.count - 2) i = ax.count - 2;
    base[a] = i;
    frac[a] = u - i;
  }
  double acc = 0.0;
  int corners = 1 << n;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    size_t flat = 0;
    for (int a = 0; a < n; ++a) {
      int bit = (c >> a) & 1;
      w *= bit ? frac[a] : 1.0 - frac[a];
      flat = flat * grid.space[a].count + (base[a] + bit);
    }
    acc += w * v[flat];
  }
  return acc;
}

void ImpulseMap::set(size_t node, const double* value) {
  present[node] = 1;
  for (int a = 0; a < grid.dim(); ++a) xi[node * grid.dim() + a] = value[a];
}

void for_each_node(const Grid& g,
                   const std::function<void(size_t, const std::vector<int>&,
                                            const std::vector<double>&)>& fn) {
  std::vector<int> multi(g.dim(), 0);
  std::vector<double> x(g.dim());
  size_t count = g.node_count();
  for (size_t flat = 0; flat < count; ++flat) {
    for (int a = 0; a < g.dim(); ++a) x[a] = g.space[a].coord(multi[a]);
    fn(flat, multi, x);
    for (int a = g.dim() - 1; a >= 0; --a) {
      if (++multi[a] < g.space[a].count) break;
      multi[a] = 0;
    }
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_value(const std::string& cell, const std::string& path) {
  char* end = nullptr;
  double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0' || !std::isfinite(v))
    throw IntegrityError("artifact integrity: non-numeric value in " + path);
  return v;
}

std::string csv_header(const Grid& g, const std::vector<std::string>& value_cols) {
  std::string h;
  for (int a = 0; a < g.dim(); ++a) h += "i" + std::to_string(a) + ",";
  for (int a = 0; a < g.dim(); ++a) h += "x" + std::to_string(a) + ",";
  for (size_t i = 0; i < value_cols.size(); ++i) {
    h += value_cols[i];
    if (i + 1 < value_cols.size()) h += ",";
  }
  return h;
}

}  // namespace

void write_field_csv(const std::string& path, const Field& f) {
  auto out = open_out(path);
  out << csv_header(f.grid, {"value"}) << "\n";
  for_each_node(f.grid, [&](size_t flat, const std::vector<int>& multi,
                            const std::vector<double>& x) {
    for (int i : multi) out << i << ",";
    for (double c : x) out << format_double(c) << ",";
    out << format_double(f.v[flat]) << "\n";
  });
}

Field read_field_csv(const std::string& path, const Grid& g, int slice) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw IntegrityError("artifact integrity: empty file " + path);
  Field f(g, slice);
  size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != static_cast<size_t>(2 * g.dim() + 1))
      throw IntegrityError("artifact integrity: bad column count in " + path);
    std::vector<int> multi(g.dim());
    for (int a = 0; a < g.dim(); ++a) {
      multi[a] = static_cast<int>(parse_value(cells[a], path));
      if (multi[a] < 0 || multi[a] >= g.space[a].count)
        throw IntegrityError("artifact integrity: node index out of range in " + path);
    }
    f.v[g.flat_index(multi)] = parse_value(cells[2 * g.dim()], path);
    ++rows;
  }
  if (rows != g.node_count())
    throw IntegrityError("artifact integrity: row count mismatch in " + path);
  return f;
}

void write_impulse_csv(const std::string& path, const ImpulseMap& m) {
  auto out = open_out(path);
  std::vector<std::string> cols;
  for (int a = 0; a < m.grid.dim(); ++a) cols.push_back("xi" + std::to_string(a));
  out << csv_header(m.grid, cols) << "\n";
  for_each_node(m.grid, [&](size_t flat, const std::vector<int>& multi,
                            const std::vector<double>& x) {
    if (!m.has(flat)) return;
    for (int i : multi) out << i << ",";
    for (double c : x) out << format_double(c) << ",";
    const double* xi = m.get(flat);
    for (int a = 0; a < m.grid.dim(); ++a) {
      out << format_double(xi[a]);
      if (a + 1 < m.grid.dim()) out << ",";
    }
    out << "\n";
  });
}

ImpulseMap read_impulse_csv(const std::string& path, const Grid& g, int slice) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw IntegrityError("artifact integrity: empty file " + path);
  ImpulseMap m(g, slice);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != static_cast<size_t>(3 * g.dim()))
      throw IntegrityError("artifact integrity: bad column count in " + path);
    std::vector<int> multi(g.dim());
    for (int a = 0; a < g.dim(); ++a) {
      multi[a] = static_cast<int>(parse_value(cells[a], path));
      if (multi[a] < 0 || multi[a] >= g.space[a].count)
        throw IntegrityError("artifact integrity: node index out of range in " + path);
    }
    std::vector<double> xi(g.dim());
    for (int a = 0; a < g.dim(); ++a) xi[a] = parse_value(cells[2 * g.dim() + a], path);
    m.set(g.flat_index(multi), xi.data());
  }
  return m;
}

void write_mask_csv(const std::string& path, const Grid& g,
                    const std::vector<uint8_t>& action) {
  auto out = open_out(path);
  out << csv_header(g, {"action"}) << "\n";
  for_each_node(g, [&](size_t flat, const std::vector<int>& multi,
                       const std::vector<double>& x) {
    for (int i : multi) out << i << ",";
    for (double c : x) out << format_double(c) << ",";
    out << (action[flat] ? 1 : 0) << "\n";
  });
}

std::vector<uint8_t> read_mask_csv(const std::string& path, const Grid& g) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw IntegrityError("artifact integrity: empty file " + path);
  std::vector<uint8_t> mask(g.node_count(), 0);
  size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != static_cast<size_t>(2 * g.dim() + 1))
      throw IntegrityError("artifact integrity: bad column count in " + path);
    std::vector<int> multi(g.dim());
    for (int a = 0; a < g.dim(); ++a)
      multi[a] = static_cast<int>(parse_value(cells[a], path));
    double v = parse_value(cells[2 * g.dim()], path);
    mask[g.flat_index(multi)] = v != 0.0 ? 1 : 0;
    ++rows;
  }
  if (rows != g.node_count())
    throw IntegrityError("artifact integrity: row count mismatch in " + path);
  return mask;
}

void write_grid_json(const std::string& path, const Grid& g) {
  json j;
  j["space"] = json::array();
  for (const Axis& a : g.space)
    j["space"].push_back({{"lo", a.lo}, {"hi", a.hi}, {"count", a.count}});
  j["time_count"] = g.time_count;
  j["horizon"] = g.horizon;
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

Grid read_grid_json(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IntegrityError("artifact integrity: bad grid json: " + std::string(e.what()));
  }
  std::vector<Axis> axes;
  for (const auto& a : j.at("space"))
    axes.push_back({a.at("lo").get<double>(), a.at("hi").get<double>(),
                    a.at("count").get<int>()});
  return Grid(axes, j.at("time_count").get<int>(), j.at("horizon").get<double>());
}

}  // namespace qvi
