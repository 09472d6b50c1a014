#include <cmath>
#include <string>

#include "doctest.h"
#include "qvi/checks.hpp"
#include "qvi/problem.hpp"
#include "qvi/sim.hpp"
#include "qvi/solver.hpp"

using namespace qvi;

namespace {

const char* kHeatProblem = R"json({
  "dim": 1, "horizon": 1.0, "discount": 0.0,
  "drift": ["0"], "diffusion": [["sqrt(2)"]],
  "running_cost": "0", "terminal_cost": "x[0]^2",
  "intervention_cost": "1000000 + xi[0]^2",
  "constants": {"gamma": 0.4, "delta": 0.5, "mu": 0.95, "nu": 0.5, "K": 1.0, "L_bound": 1.0}})json";

const char* kSmallGrid = R"({
  "grid": {"space": [{"lo": -2.0, "hi": 2.0, "count": 81}], "time_count": 41},
  "epsilon_schedule": [0.1, 0.025, 0.00625, 0.0015625, 0.000390625,
                       9.765625e-05, 2.44140625e-05, 6.103515625e-06,
                       1.52587890625e-06, 3.814697265625e-07,
                       9.5367431640625e-08, 2.384185791015625e-08],
  "search_radius": [1.0]})";

struct HeatFixture {
  ProblemSpec spec;
  Solution sol;
  HeatFixture()
      : spec(parse_problem(kHeatProblem)),
        sol(solve_penalized(spec, SolverConfig::parse(kSmallGrid))) {}
};

HeatFixture& heat() {
  static HeatFixture fx;
  return fx;
}

PathConfig mc(long n, double dt = 1e-3, uint64_t seed = 0) {
  PathConfig cfg;
  cfg.n_paths = n;
  cfg.dt = dt;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("dpp at s = t0 is degenerate and exact") {
  auto& fx = heat();
  CheckReport rep = check_dpp(fx.spec, fx.sol, StopRule::fixed_time(0.0), {0.5}, 0.0,
                              mc(500));
  CHECK(rep.passed());
  CHECK(std::fabs(rep.details.at("residual").get<double>()) <= 1e-9);
}

TEST_CASE("dpp at s = T equals the policy-gap estimate") {
  auto& fx = heat();
  PathConfig cfg = mc(2000);
  CheckReport rep = check_dpp(fx.spec, fx.sol, StopRule::fixed_time(1.0), {0.3}, 0.0, cfg);
  GapReport gap = evaluate_policy_gap(fx.spec, fx.sol, {0.3}, 0.0, cfg);
  // at tau = T the tail is the raw terminal cost, so both sides add up the
  // same per-path totals from the same streams
  CHECK(rep.details.at("rhs_mean").get<double>() ==
        doctest::Approx(gap.estimate.mean).epsilon(1e-12));
}

TEST_CASE("dpp first-exit passes on the heat solve") {
  auto& fx = heat();
  CheckReport rep = check_dpp(fx.spec, fx.sol, StopRule::first_exit({-1.0}, {1.0}),
                              {0.0}, 0.0, mc(4000));
  CHECK(rep.passed());
  double residual = std::fabs(rep.details.at("residual").get<double>());
  double tol = rep.tolerances.at("tol_dpp").get<double>();
  CHECK(residual <= tol);
}

TEST_CASE("dpp goes inconclusive when too many paths leave the box") {
  auto& fx = heat();
  // from x0 = 1 a half-horizon of free Brownian motion leaves [-2,2] often
  CheckReport rep = check_dpp(fx.spec, fx.sol, StopRule::fixed_time(0.5), {1.0}, 0.0,
                              mc(2000));
  CHECK(rep.status == "inconclusive");
  CHECK(rep.details.at("oob_frac").get<double>() > 0.01);
}

TEST_CASE("bounds check fits finite constants on the heat solve") {
  auto& fx = heat();
  CheckReport rep = check_bounds(fx.sol, fx.spec);
  CHECK(rep.passed());
  CHECK(rep.details.at("C_up").get<double>() > 0.0);
  CHECK(std::isfinite(rep.details.at("C_x").get<double>()));
  CHECK(std::isfinite(rep.details.at("C_t").get<double>()));
  CHECK(rep.details.at("C_low").get<double>() == 0.0);  // u >= 0 here
}

TEST_CASE("obstacle chain passes on the heat solve") {
  auto& fx = heat();
  CheckReport rep = check_obstacle_chain(fx.sol, fx.spec, fx.sol.region_tol);
  CHECK(rep.passed());
  CHECK(rep.margin > 0.0);
}

TEST_CASE("viscosity probe passes on the heat solve") {
  auto& fx = heat();
  CheckReport rep = check_viscosity_probe(fx.sol, fx.spec, 0.05, 200, 0);
  CHECK(rep.passed());
  CHECK(rep.details.at("violations").get<int>() == 0);
}

TEST_CASE("viscosity probe flags a wrong value function") {
  // u = 0 with f = 1 violates the PDE branch by -1 at every probe.
  ProblemSpec spec = parse_problem(R"({
    "dim": 1, "horizon": 1.0, "discount": 0.0,
    "drift": ["0"], "diffusion": [["1"]],
    "running_cost": "1", "terminal_cost": "0",
    "intervention_cost": "1000000 + xi[0]^2",
    "constants": {"gamma": 0.4, "delta": 0.5, "mu": 0.95, "nu": 0.5, "K": 1.0, "L_bound": 1.0}})");
  Grid g({Axis{-2.0, 2.0, 81}}, 41, 1.0);
  Solution sol;
  sol.grid = g;
  sol.region_tol = 1e-6;
  sol.search_radius = {1.0};
  for (int k = 0; k < g.time_count; ++k) {
    sol.u.emplace_back(g, k, 0.0);
    sol.action.emplace_back(g.node_count(), 0);
    sol.impulse.emplace_back(g, k);
  }
  CheckReport rep = check_viscosity_probe(sol, spec, 0.05, 100, 0);
  CHECK(rep.status == "fail");
  CHECK(rep.details.at("violation_rate").get<double>() > 0.9);
}

TEST_CASE("check report JSON round trip") {
  auto& fx = heat();
  CheckReport rep = check_bounds(fx.sol, fx.spec);
  CheckReport back = CheckReport::from_json(rep.to_json());
  CHECK(back.id == rep.id);
  CHECK(back.status == rep.status);
  CHECK(back.margin == rep.margin);
  CHECK(back.tolerances == rep.tolerances);
  CHECK(back.witnesses == rep.witnesses);
  CHECK(back.details == rep.details);
}
