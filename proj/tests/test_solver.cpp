#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "qvi/penalty.hpp"
#include "qvi/problem.hpp"
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

std::string temp_dir(const char* tag) {
  auto p = std::filesystem::temp_directory_path() /
           (std::string("qvi_solver_test_") + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("penalty family shape") {
  PenaltyFamily beta{0.05};
  CHECK(beta.value(0.0) == 0.0);
  CHECK(beta.value(0.1) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(beta.value(-1e9) >= -1.0);           // bounded below
  CHECK(beta.value(-0.2) < 0.0);
  CHECK(beta.value(-0.2) > -1.0 - 1e-15);

  // strictly increasing, derivative matches a finite difference
  double prev = beta.value(-2.0);
  for (double x = -1.95; x < 1.0; x += 0.05) {
    double v = beta.value(x);
    CHECK(v >= prev);
    prev = v;
  }
  for (double x : {-0.5, -0.01, 0.02, 0.4}) {
    double fd = (beta.value(x + 1e-7) - beta.value(x - 1e-7)) / 2e-7;
    CHECK(beta.deriv(x) == doctest::Approx(fd).epsilon(1e-4));
  }

  // for fixed x < 0 the penalty vanishes as eps -> 0
  double prev_mag = std::fabs(PenaltyFamily{0.1}.value(-0.3));
  for (double eps : {0.01, 0.001, 1e-4}) {
    double mag = std::fabs(PenaltyFamily{eps}.value(-0.3));
    CHECK(mag < prev_mag);
    prev_mag = mag;
  }
  CHECK(prev_mag < 1e-3);
}

TEST_CASE("penalized solve reproduces the heat closed form") {
  ProblemSpec spec = parse_problem(kHeatProblem);
  SolverConfig cfg = SolverConfig::parse(kSmallGrid);
  Solution sol = solve_penalized(spec, cfg);

  CHECK(sol.diag.converged);
  CHECK(sol.diag.outer_iterations >= 1);

  // u(x, s) = x^2 + 2s; the scheme is exact on it up to solver tolerances.
  double worst = 0.0;
  for (int k = 0; k < sol.grid.time_count; ++k) {
    double s = sol.grid.slice_time(k);
    for (size_t i = 0; i < sol.grid.node_count(); ++i) {
      double x;
      sol.grid.node_point(i, &x);
      worst = std::max(worst, std::fabs(sol.u[k].v[i] - (x * x + 2.0 * s)));
    }
  }
  CHECK(worst <= 1e-4);

  // B ~ 1e6 makes intervention absurd: no action nodes anywhere.
  for (int k = 0; k < sol.grid.time_count; ++k)
    for (uint8_t a : sol.action[k]) CHECK(a == 0);
}

TEST_CASE("solution round-trips through the artifact directory") {
  ProblemSpec spec = parse_problem(kHeatProblem);
  SolverConfig cfg = SolverConfig::parse(kSmallGrid);
  Solution sol = solve_penalized(spec, cfg);

  std::string dir = temp_dir("roundtrip");
  save_solution(sol, dir);
  Solution back = load_solution(dir);

  CHECK(back.grid.same_box(sol.grid));
  CHECK(back.grid.time_count == sol.grid.time_count);
  CHECK(back.region_tol == sol.region_tol);
  CHECK(back.search_radius == sol.search_radius);
  CHECK(back.diag.converged == sol.diag.converged);
  CHECK(back.diag.outer_iterations == sol.diag.outer_iterations);
  REQUIRE(back.u.size() == sol.u.size());
  for (int k = 0; k < sol.grid.time_count; ++k) {
    for (size_t i = 0; i < sol.grid.node_count(); ++i) {
      CHECK(back.u[k].v[i] == sol.u[k].v[i]);  // format_double is lossless
      CHECK(back.action[k][i] == sol.action[k][i]);
      CHECK(back.impulse[k].has(i) == sol.impulse[k].has(i));
      if (sol.impulse[k].has(i))
        CHECK(back.impulse[k].get(i)[0] == sol.impulse[k].get(i)[0]);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("qvi residual is small on the converged heat solve") {
  ProblemSpec spec = parse_problem(kHeatProblem);
  SolverConfig cfg = SolverConfig::parse(kSmallGrid);
  Solution sol = solve_penalized(spec, cfg);
  ResidualSummary rs = qvi_residual(sol, spec, cfg);
  CHECK(rs.r1_max <= 1e-5);
  CHECK(rs.comp_max <= rs.r1_max + 1e-15);
}

TEST_CASE("extract_regions grows with the tolerance") {
  ProblemSpec spec = parse_problem(R"json({
    "dim": 1, "horizon": 1.0, "discount": 0.0,
    "drift": ["0"], "diffusion": [["1"]],
    "running_cost": "x[0]^2", "terminal_cost": "0",
    "intervention_cost": "0.5 + 0.1 * abs(xi[0])",
    "constants": {"gamma": 0.4, "delta": 0.5, "mu": 0.95, "nu": 0.5, "K": 0.5, "L_bound": 0.5}})json");
  SolverConfig cfg = SolverConfig::parse(R"({
    "grid": {"space": [{"lo": -3.0, "hi": 3.0, "count": 121}], "time_count": 61},
    "epsilon_schedule": [0.1, 0.025, 0.00625, 0.0015625, 0.000390625,
                         9.765625e-05, 2.44140625e-05, 6.103515625e-06],
    "search_radius": [6.0]})");
  Solution sol = solve_penalized(spec, cfg);
  CHECK(sol.diag.converged);

  size_t tight = 0, loose = 0;
  extract_regions(sol, spec, 1e-8);
  for (int k = 0; k < sol.grid.time_count; ++k)
    for (uint8_t a : sol.action[k]) tight += a;
  std::vector<std::vector<uint8_t>> tight_masks = sol.action;

  extract_regions(sol, spec, 1e-2);
  for (int k = 0; k < sol.grid.time_count; ++k)
    for (uint8_t a : sol.action[k]) loose += a;
  CHECK(loose >= tight);
  // supersets node by node
  for (int k = 0; k < sol.grid.time_count; ++k)
    for (size_t i = 0; i < sol.grid.node_count(); ++i)
      if (tight_masks[k][i]) CHECK(sol.action[k][i] == 1);

  // an impulse problem this cheap must actually intervene somewhere
  CHECK(loose > 0);
}

TEST_CASE("solver config validation") {
  CHECK_THROWS_AS(SolverConfig::parse("{}"), ConfigError);
  CHECK_THROWS_AS(SolverConfig::parse(R"({
    "grid": {"space": [{"lo": -1, "hi": 1, "count": 11}], "time_count": 11},
    "epsilon_schedule": [0.1, 0.2]})"), ConfigError);  // not decreasing
  CHECK_THROWS_AS(SolverConfig::parse(R"({
    "grid": {"space": [{"lo": 1, "hi": -1, "count": 11}], "time_count": 11},
    "epsilon_schedule": [0.1]})"), ConfigError);       // hi <= lo
  CHECK_THROWS_AS(SolverConfig::parse(R"({
    "grid": {"space": [{"lo": -1, "hi": 1, "count": 11}], "time_count": 11},
    "epsilon_schedule": [0.1],
    "search_radius": [1.0, 2.0]})"), ConfigError);     // radius length != dim
}
