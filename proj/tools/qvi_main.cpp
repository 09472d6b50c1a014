#include <string>

#include <CLI11.hpp>

#include "qvi/manifest.hpp"
#include "qvi/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"finite-horizon impulse control: QVI solver, SDE simulator, validation"};
  app.set_version_flag("--version",
                       std::string("qvi ") + qvi::tool_version_string());
  app.require_subcommand(1);

  qvi::SolveArgs sa;
  CLI::App* solve = app.add_subcommand(
      "solve", "solve the penalized HJB QVI and write solution artifacts");
  solve->add_option("--problem", sa.problem_file, "problem JSON")->required();
  solve->add_option("--solver", sa.solver_file, "solver config JSON")->required();
  solve->add_option("--out", sa.out_dir, "output directory")->required();
  solve->add_flag("--force", sa.force,
                  "proceed past standing-assumption failures");
  solve->add_option("--jobs", sa.jobs, "worker cap");

  qvi::SimulateArgs ma;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte Carlo cost estimate under an impulse strategy");
  simulate->add_option("--problem", ma.problem_file, "problem JSON")->required();
  simulate
      ->add_option("--strategy", ma.strategy,
                   "none | policy:<solve_dir> | schedule:<file> | threshold:<file>")
      ->required();
  simulate->add_option("--x0", ma.x0, "initial state, comma separated")
      ->required()
      ->delimiter(',');
  simulate->add_option("--t0", ma.t0, "initial time");
  simulate->add_option("--mc", ma.mc_file, "Monte Carlo config JSON")->required();
  simulate->add_option("--out", ma.out_dir, "output directory")->required();

  qvi::ValidateArgs va;
  CLI::App* validate = app.add_subcommand(
      "validate", "run theorem-backed checks against a solved artifact dir");
  validate->add_option("--solution", va.solution_dir, "solve output directory")
      ->required();
  validate->add_option("--checks", va.checks, "subset of dpp,bounds,obstacle,viscosity")
      ->delimiter(',');
  validate->add_option("--out", va.out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) return qvi::cmd_solve(sa);
  if (simulate->parsed()) return qvi::cmd_simulate(ma);
  if (validate->parsed()) return qvi::cmd_validate(va);
  return 0;
}
