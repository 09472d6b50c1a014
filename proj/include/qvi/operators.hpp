#pragma once

#include <functional>
#include <vector>

#include <Eigen/Sparse>

#include "qvi/grid.hpp"
#include "qvi/problem.hpp"

namespace qvi {

/// Values of a slice field beyond the grid box: clamp to the box and track
/// the terminal-cost increment, u(y) = u(clamp(y)) + g(y) - g(clamp(y)).
/// Lookups farther than `margin` per axis are an error.
class ExtendedField {
 public:
  ExtendedField(const Field& u, const ProblemSpec& spec, double margin_frac);
  double operator()(const double* y) const;

 private:
  const Field& u_;
  const ProblemSpec& spec_;
  std::vector<double> margin_;
};

struct QuadratureConfig {
  int nodes = 64;               // radial Gauss-Legendre evaluations
  double extension_margin = 1.0;  // allowed overshoot, in box widths per axis
};

/// Discrete generator Lu = -tr[A D^2 u] - b . Du + r u.  Interior nodes use
/// central second differences, sign-split 7-point mixed stencils and
/// drift-upwinded first differences; the boundary ring falls back to
/// one-sided stencils of the same order.
Field apply_L(const Field& u, const ProblemSpec& spec, double t);

/// Discrete integro operator for the jump part.  Atom and small-jump values
/// come from u (extended beyond the box); the first-order compensation for
/// |z| < 1 uses the gradient of `gradient_source`.  `theta` splits the radial
/// quadrature at the small/large jump threshold.
Field apply_I(const Field& u, const ProblemSpec& spec, double t, double theta,
              const Field& gradient_source, const QuadratureConfig& quad = {});

struct MResult {
  Field mu;
  ImpulseMap xi;
};

struct MSearchConfig {
  bool refine = true;
  int golden_iters = 48;
};

/// Intervention operator Mu(x) = min over xi != 0 of u(x + xi) + B(xi, t),
/// searched over grid-aligned shifts within `radius` per axis (clipped so
/// x + xi stays in the box), then refined once per axis by golden section.
/// Ties prefer the smallest |xi|, then lexicographic order.
MResult apply_M(const Field& u, const ProblemSpec& spec, double t,
                const std::vector<double>& radius, const MSearchConfig& cfg = {});

/// Lateral boundary closure for implicit time steps.
struct BoundaryRule {
  enum Kind {
    kGrowthTracking,  // u(boundary) - u(inward neighbor) = g increment
    kDirichlet,       // u(boundary) = data(x, s)
  } kind = kGrowthTracking;
  std::function<double(const std::vector<double>&, double)> data;  // kDirichlet
};

/// Implicit-step matrix rows: interior rows carry the generator stencil,
/// boundary rows the chosen closure.  The step matrix is I/dt + this.
struct OperatorMatrix {
  Eigen::SparseMatrix<double> L;
  Eigen::VectorXd boundary_rhs;       // target values for boundary rows
  std::vector<uint8_t> is_boundary;
};

OperatorMatrix assemble_generator(const Grid& g, const ProblemSpec& spec, double t,
                                  const BoundaryRule& rule, double slice_s);

}  // namespace qvi
