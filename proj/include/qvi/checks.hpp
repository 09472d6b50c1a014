#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qvi/problem.hpp"
#include "qvi/sim.hpp"
#include "qvi/solver.hpp"

namespace qvi {

/// Outcome of one validation check.  status is "pass", "fail" or
/// "inconclusive"; margin is the signed distance to the failure surface
/// (positive = pass with room).  Failing checks carry a witness.
struct CheckReport {
  std::string id;
  std::string status;
  double margin = 0.0;
  nlohmann::ordered_json tolerances;
  nlohmann::ordered_json witnesses;
  nlohmann::ordered_json details;

  bool passed() const { return status == "pass"; }
  nlohmann::ordered_json to_json() const;
  static CheckReport from_json(const nlohmann::ordered_json& j);
};

/// Dynamic-programming residual: simulate the solver's feedback policy up to
/// the stop rule, add the solver value at the stopped state, compare with the
/// solver value at (x0, t0).  Tolerance is CI95 + c_disc (h^2 + ds + dt).
/// More than 1% of paths stopping outside the solved box (or overflowing)
/// makes the verdict "inconclusive".
CheckReport check_dpp(const ProblemSpec& spec, const Solution& sol,
                      const StopRule& stop, const std::vector<double>& x0,
                      double t0, const PathConfig& cfg, double c_disc = 5.0);

/// A-priori value bounds: fits the smallest constants with
///   -C_low (T+1) <= u <= C_up (1 + |x|^(gamma+delta))
/// plus Hoelder-quotient constants in x and t over sampled node pairs.
/// Passes when every fit is finite.
CheckReport check_bounds(const Solution& sol, const ProblemSpec& spec,
                         uint64_t seed = 0, int n_pairs = 10000);

/// Obstacle chain: (a) u <= M-hat u everywhere (tol 1e-6 scale), (b) every
/// action-node destination keeps the K/2 continuation margin (tol =
/// region_tol), (c) second differences of M-hat u stay below the
/// continuation-region curvature of u.  Takes the solution mutably to
/// recompute M-hat u after a load.
CheckReport check_obstacle_chain(Solution& sol, const ProblemSpec& spec,
                                 double region_tol);

/// Pointwise QVI residual through touching quadratics: at random interior
/// probes, fit a space-time quadratic on the 5^n x 3 neighborhood; where the
/// fit is a genuine touching function, evaluate
///   max{ phi_s + L phi - f - I1_theta[phi] - I2_theta[u], u - M-hat u }
/// and count |residual| > tol_visc as a violation.  Passes when the
/// violation rate among valid probes stays within max_violation_frac.
CheckReport check_viscosity_probe(Solution& sol, const ProblemSpec& spec,
                                  double theta, int n_probes, uint64_t seed,
                                  double tol_visc = 5e-2,
                                  double max_violation_frac = 0.01);

}  // namespace qvi
