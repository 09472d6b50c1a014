#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qvi/errors.hpp"

namespace qvi {

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  int count = 0;

  double h() const { return (hi - lo) / (count - 1); }
  double coord(int i) const { return lo + i * h(); }
};

/// Uniform tensor grid over a box, plus the time discretization of [0, T].
/// Time is stored in the solver's inverted convention: slice k lives at
/// s_k = k * dt with s = T - (original time).
struct Grid {
  std::vector<Axis> space;
  int time_count = 0;
  double horizon = 0.0;

  Grid() = default;
  Grid(std::vector<Axis> axes, int t_count, double T);

  int dim() const { return static_cast<int>(space.size()); }
  size_t node_count() const;
  double dt() const { return horizon / (time_count - 1); }
  double slice_time(int k) const { return k * dt(); }

  size_t flat_index(const std::vector<int>& multi) const;
  std::vector<int> multi_index(size_t flat) const;
  void node_point(size_t flat, double* out) const;
  std::vector<double> node_point(size_t flat) const;

  bool inside(const double* x) const;
  /// Componentwise clamp onto the box.
  void clamp(const double* x, double* out) const;
  /// Nearest node (rounded per axis, clamped).
  std::vector<int> nearest_node(const double* x) const;

  /// True if the node is on the lateral boundary (any axis at an end).
  bool on_boundary(const std::vector<int>& multi) const;
  /// Distance from x to the nearest lateral face.
  double boundary_distance(const double* x) const;

  bool same_box(const Grid& other) const;
};

/// Scalar values on every spatial node of one time slice.
struct Field {
  Grid grid;
  int slice = 0;
  std::vector<double> v;

  Field() = default;
  Field(const Grid& g, int slice_index, double fill = 0.0)
      : grid(g), slice(slice_index), v(g.node_count(), fill) {}

  double& operator[](size_t i) { return v[i]; }
  double operator[](size_t i) const { return v[i]; }

  /// Multilinear interpolation; x must lie inside the box.
  double interpolate(const double* x) const;
};

/// Per-node optional impulse vectors for one time slice.
struct ImpulseMap {
  Grid grid;
  int slice = 0;
  std::vector<uint8_t> present;
  std::vector<double> xi;  // dim() entries per node, zero when absent

  ImpulseMap() = default;
  ImpulseMap(const Grid& g, int slice_index)
      : grid(g), slice(slice_index), present(g.node_count(), 0),
        xi(g.node_count() * g.dim(), 0.0) {}

  void set(size_t node, const double* v);
  const double* get(size_t node) const { return &xi[node * grid.dim()]; }
  bool has(size_t node) const { return present[node] != 0; }
};

void for_each_node(const Grid& g,
                   const std::function<void(size_t, const std::vector<int>&,
                                            const std::vector<double>&)>& fn);

std::string format_double(double v);

void write_field_csv(const std::string& path, const Field& f);
Field read_field_csv(const std::string& path, const Grid& g, int slice);
void write_impulse_csv(const std::string& path, const ImpulseMap& m);
ImpulseMap read_impulse_csv(const std::string& path, const Grid& g, int slice);
void write_mask_csv(const std::string& path, const Grid& g,
                    const std::vector<uint8_t>& action);
std::vector<uint8_t> read_mask_csv(const std::string& path, const Grid& g);

void write_grid_json(const std::string& path, const Grid& g);
Grid read_grid_json(const std::string& path);

}  // namespace qvi
