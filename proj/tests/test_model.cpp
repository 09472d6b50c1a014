#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "qvi/errors.hpp"
#include "qvi/problem.hpp"

using namespace qvi;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Minimal valid problem with adjustable constants block.
std::string with_constants(const std::string& constants) {
  return std::string(R"({
    "dim": 1, "horizon": 1.0, "discount": 0.0,
    "drift": ["0"], "diffusion": [["1"]],
    "running_cost": "0", "terminal_cost": "x[0]^2",
    "intervention_cost": "1 + xi[0]^2",
    "constants": )") + constants + "}";
}

const char* kGoodConstants =
    R"({"gamma": 0.4, "delta": 0.5, "mu": 0.95, "nu": 0.5, "K": 1.0, "L_bound": 1.0})";

}  // namespace

TEST_CASE("shipped heat config parses and evaluates") {
  ProblemSpec spec = parse_problem(slurp(std::string(QVI_CONFIG_DIR) + "/heat_1d.problem.json"));
  CHECK(spec.dim == 1);
  CHECK(spec.horizon == 1.0);
  CHECK(spec.discount == 0.0);
  CHECK(spec.jumps.empty());

  double x = 1.5;
  CHECK(spec.eval_g(&x) == doctest::Approx(2.25).epsilon(1e-15));
  CHECK(spec.eval_f(&x, 0.3) == 0.0);
  double xi = 2.0;
  CHECK(spec.eval_B(&xi, 0.0) == doctest::Approx(1000004.0).epsilon(1e-15));

  double sig = 0.0;
  spec.eval_sigma(&x, 0.0, &sig);
  CHECK(sig == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  CoeffBundle cb = eval_coeffs(spec, &x, 0.0);
  CHECK(cb.A[0] == doctest::Approx(1.0).epsilon(1e-15));  // A = sigma^2/2
  CHECK(cb.b[0] == 0.0);
  CHECK(cb.atoms.empty());
}

TEST_CASE("shipped jump config parses with atom and small density") {
  ProblemSpec spec = parse_problem(slurp(std::string(QVI_CONFIG_DIR) + "/jump_1d.problem.json"));
  REQUIRE(spec.jumps.atoms.size() == 1);
  REQUIRE(spec.jumps.small_density.has_value());
  CHECK(spec.jumps.order_delta_bound == doctest::Approx(0.6));
  CHECK(spec.jumps.small_density->radius_cut == doctest::Approx(0.5));

  // default direction stencil in 1-D: +e0, -e0 with equal weights
  const auto& sd = *spec.jumps.small_density;
  REQUIRE(sd.directions.size() == 2);
  CHECK(sd.directions[0][0] == doctest::Approx(1.0));
  CHECK(sd.directions[1][0] == doctest::Approx(-1.0));
  CHECK(sd.weights[0] == doctest::Approx(0.5));

  double x = 0.7;
  CoeffBundle cb = eval_coeffs(spec, &x, 0.2);
  REQUIRE(cb.atoms.size() == 1);
  CHECK(cb.atoms[0].lambda == doctest::Approx(0.5));
  CHECK(cb.atoms[0].z[0] == doctest::Approx(0.3));
}

TEST_CASE("constants are validated") {
  CHECK_NOTHROW(parse_problem(with_constants(kGoodConstants)));

  // gamma >= 0, so zero is allowed
  CHECK_NOTHROW(parse_problem(with_constants(
      R"({"gamma": 0.0, "delta": 0.5, "mu": 0.95, "nu": 0.5, "K": 1.0, "L_bound": 1.0})")));

  CHECK_THROWS_AS(parse_problem(with_constants(
      R"({"gamma": -0.1, "delta": 0.5, "mu": 0.95, "nu": 0.5, "K": 1.0, "L_bound": 1.0})")),
      ConfigError);
  CHECK_THROWS_AS(parse_problem(with_constants(
      R"({"gamma": 0.4, "delta": 0.0, "mu": 0.95, "nu": 0.5, "K": 1.0, "L_bound": 1.0})")),
      ConfigError);
  CHECK_THROWS_AS(parse_problem(with_constants(
      R"({"gamma": 0.4, "delta": 0.5, "mu": 1.2, "nu": 0.5, "K": 1.0, "L_bound": 1.0})")),
      ConfigError);
  CHECK_THROWS_AS(parse_problem(with_constants(
      R"({"gamma": 0.4, "delta": 0.5, "mu": 0.95, "nu": 1.0, "K": 1.0, "L_bound": 1.0})")),
      ConfigError);
  CHECK_THROWS_AS(parse_problem(with_constants(
      R"({"gamma": 0.4, "delta": 0.5, "mu": 0.95, "nu": 0.5, "K": 0.0, "L_bound": 1.0})")),
      ConfigError);
}

TEST_CASE("dominance gamma+delta < mu is enforced unless forced") {
  const std::string bad = with_constants(
      R"({"gamma": 0.6, "delta": 0.5, "mu": 0.95, "nu": 0.5, "K": 1.0, "L_bound": 1.0})");
  CHECK_THROWS_AS(parse_problem(bad), AssumptionError);
  CHECK_NOTHROW(parse_problem(bad, false));

  const std::string bad_nu = with_constants(
      R"({"gamma": 0.2, "delta": 0.5, "mu": 0.8, "nu": 0.9, "K": 1.0, "L_bound": 1.0})");
  CHECK_THROWS_AS(parse_problem(bad_nu), AssumptionError);
  CHECK_NOTHROW(parse_problem(bad_nu, false));
}

TEST_CASE("malformed configs raise ConfigError") {
  CHECK_THROWS_AS(parse_problem("not json"), ConfigError);
  CHECK_THROWS_AS(parse_problem("{}"), ConfigError);

  // drift length must match dim
  CHECK_THROWS_AS(parse_problem(std::string(R"({
    "dim": 2, "horizon": 1.0, "discount": 0.0,
    "drift": ["0"], "diffusion": [["1", "0"], ["0", "1"]],
    "running_cost": "0", "terminal_cost": "x[0]^2",
    "intervention_cost": "1 + xi[0]^2",
    "constants": )") + kGoodConstants + "}"), ConfigError);

  // order_delta_bound is required once jumps are present
  CHECK_THROWS_AS(parse_problem(std::string(R"({
    "dim": 1, "horizon": 1.0, "discount": 0.0,
    "drift": ["0"], "diffusion": [["1"]],
    "jumps": {"atoms": [{"intensity": "1", "size": ["0.5"]}]},
    "running_cost": "0", "terminal_cost": "x[0]^2",
    "intervention_cost": "1 + xi[0]^2",
    "constants": )") + kGoodConstants + "}"), ConfigError);

  // terminal cost may not reference t
  CHECK_THROWS_AS(parse_problem(std::string(R"({
    "dim": 1, "horizon": 1.0, "discount": 0.0,
    "drift": ["0"], "diffusion": [["1"]],
    "running_cost": "0", "terminal_cost": "x[0]^2 + t",
    "intervention_cost": "1 + xi[0]^2",
    "constants": )") + kGoodConstants + "}"), ConfigError);
}

TEST_CASE("render round trip preserves evaluation") {
  ProblemSpec spec = parse_problem(slurp(std::string(QVI_CONFIG_DIR) + "/jump_1d.problem.json"));
  ProblemSpec back = parse_problem_json(render_problem(spec));

  for (double x : {-1.3, 0.0, 0.7, 1.9}) {
    for (double t : {0.0, 0.4, 1.0}) {
      CHECK(spec.eval_f(&x, t) == back.eval_f(&x, t));
      CHECK(spec.eval_g(&x) == back.eval_g(&x));
      double xi = 0.5 * x + 0.1;
      CHECK(spec.eval_B(&xi, t) == back.eval_B(&xi, t));
    }
  }
  CHECK(back.jumps.atoms.size() == spec.jumps.atoms.size());
  CHECK(back.jumps.small_density.has_value());
  CHECK(back.constants.mu == spec.constants.mu);
}
