#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qvi/operators.hpp"
#include "qvi/problem.hpp"

namespace qvi {

struct SolverConfig {
  std::vector<Axis> axes;
  int time_count = 0;

  std::vector<double> epsilon_schedule;  // strictly decreasing, positive
  double theta = 0.05;                   // small/large jump split radius

  double newton_tol = 1e-9;
  int newton_max_iter = 30;
  double obstacle_tol = 1e-6;
  int obstacle_max_iter = 25;
  double region_tol = 1e-6;

  double linear_tol = 1e-12;
  int linear_max_iter = 5000;
  int quad_nodes = 64;
  double extension_margin = 1.0;
  std::vector<double> search_radius;     // per axis; empty = derive from data

  static SolverConfig parse(const std::string& text);
  static SolverConfig from_json(const nlohmann::ordered_json& j);
  nlohmann::ordered_json render() const;
};

Grid make_grid(const SolverConfig& cfg, const ProblemSpec& spec);

struct SolutionDiagnostics {
  bool converged = false;
  int outer_iterations = 0;
  double obstacle_delta = 0.0;
  // (epsilon, max |beta_eps(u - Psi)| over interior nodes), final outer sweep
  std::vector<std::pair<double, double>> penalty_max;
  int newton_iterations_total = 0;
  int linear_solves = 0;

  nlohmann::ordered_json to_json() const;
  static SolutionDiagnostics from_json(const nlohmann::ordered_json& j);
};

struct Solution {
  Grid grid;
  std::vector<Field> u;                      // slice k at inverted time s_k
  std::vector<Field> mu;                     // final M-hat u per slice
  std::vector<std::vector<uint8_t>> action;  // 1 = action region node
  std::vector<ImpulseMap> impulse;
  std::vector<double> search_radius;
  double region_tol = 0.0;
  SolutionDiagnostics diag;
};

/// Implicit march of the unconstrained linear problem u_s + Lu = f + Iu
/// from the given initial slice; jumps (if any) are treated explicitly with
/// the previous slice.  Each step solves the sparse system iteratively.
std::vector<Field> solve_linear(const ProblemSpec& spec, const Grid& grid,
                                const Field& initial, const BoundaryRule& rule,
                                const SolverConfig& cfg);

/// Penalized QVI solve: outer obstacle fixed point Psi = M-hat u, inner
/// epsilon-continuation with one Newton-solved implicit step per slice.
Solution solve_penalized(const ProblemSpec& spec, const SolverConfig& cfg);

/// Recomputes the masks and impulse maps of `sol` at the given tolerance
/// (action = nodes with M-hat u - u <= region_tol).
void extract_regions(Solution& sol, const ProblemSpec& spec, double region_tol);

struct ResidualSummary {
  double r1_max = 0.0;   // |backward-difference PDE residual| over continuation
  double r2_max = 0.0;   // |u - M-hat u| over action nodes
  double comp_max = 0.0; // max over interior of min(|d1|, |d2|)

  nlohmann::ordered_json to_json() const;
};

ResidualSummary qvi_residual(const Solution& sol, const ProblemSpec& spec,
                             const SolverConfig& cfg);

/// Artifact layout under `dir`: grid.json, slices/u_%04d.csv,
/// masks/mask_%04d.csv, impulse/xi_%04d.csv, summary.json.
void save_solution(const Solution& sol, const std::string& dir);
Solution load_solution(const std::string& dir);

/// Ensures sol.mu is populated (recomputed after load_solution).
void ensure_mu(Solution& sol, const ProblemSpec& spec);

}  // namespace qvi
