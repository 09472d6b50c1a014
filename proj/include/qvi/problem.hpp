#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qvi/coeffs.hpp"

namespace qvi {

/// Finite-activity jump component: intensity lambda_k(x,t) with destination
/// offset z_k(x,t).  Atoms with |z| >= 1 enter the generator uncompensated;
/// atoms with |z| < 1 carry the first-order compensation term.
struct JumpAtom {
  CoefficientFn intensity;
  VectorFn size;
};

/// Small-jump component: radial density rho_s(s) on (0, radius_cut) spread
/// over a fixed symmetric direction stencil (defaults to +-e_i, uniform
/// weights summing to 1).  Always compensated (radius_cut <= 1).
struct SmallDensity {
  CoefficientFn density;  // in the radius symbol s
  double radius_cut = 0.0;
  std::vector<std::vector<double>> directions;  // unit vectors
  std::vector<double> weights;
};

struct JumpSpec {
  std::vector<JumpAtom> atoms;
  std::optional<SmallDensity> small_density;
  double order_delta_bound = 0.0;

  bool empty() const { return atoms.empty() && !small_density.has_value(); }
};

/// Declared standing-assumption constants (Hoelder exponents gamma/delta for
/// the cost data, impulse-cost growth mu, coefficient growth nu, subadditivity
/// slack K, common lower bound L).
struct SpecConstants {
  double gamma = 0.0;
  double delta = 0.0;
  double mu = 0.0;
  double nu = 0.0;
  double K = 0.0;
  double L_bound = 0.0;
};

struct ProblemSpec {
  int dim = 0;
  double horizon = 0.0;
  double discount = 0.0;
  VectorFn drift;                  // b(x,t)
  MatrixFn diffusion;              // sigma(x,t), dim x m
  JumpSpec jumps;
  CoefficientFn running_cost;      // f(x,t)
  CoefficientFn terminal_cost;     // g(x)
  CoefficientFn intervention_cost; // B(xi,t)
  SpecConstants constants;

  double eval_f(const double* x, double t) const;
  double eval_g(const double* x) const;
  double eval_B(const double* xi, double t) const;
  void eval_b(const double* x, double t, double* out) const;
  void eval_sigma(const double* x, double t, double* out) const;  // dim x m
  int sigma_cols() const { return diffusion.cols; }
};

/// Pointwise coefficient bundle at (x, t): drift, A = 1/2 sigma sigma^T,
/// running cost, and resolved jump atoms.
struct CoeffBundle {
  std::vector<double> b;
  std::vector<double> A;  // dim x dim, row-major
  double f = 0.0;
  struct Atom {
    double lambda;
    std::vector<double> z;
  };
  std::vector<Atom> atoms;
};

CoeffBundle eval_coeffs(const ProblemSpec& spec, const double* x, double t);

/// Parse a problem config.  Declared-constant sanity (gamma + delta < mu,
/// nu <= mu) is enforced unless `enforce_dominance` is cleared (--force).
ProblemSpec parse_problem(const std::string& text, bool enforce_dominance = true);
ProblemSpec parse_problem_json(const nlohmann::ordered_json& j,
                               bool enforce_dominance = true);

nlohmann::ordered_json render_problem(const ProblemSpec& spec);

}  // namespace qvi
