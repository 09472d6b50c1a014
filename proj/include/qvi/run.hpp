#pragma once

#include <string>
#include <vector>

namespace qvi {

// Exit codes shared by all commands:
//   0 success, 1 missing/unreadable/corrupt files, 2 config or assumption
//   validation failure (--force bypasses assumption failures on solve only),
//   3 at least one validation check failed, 4 numerical failure.
enum ExitCode {
  kExitOk = 0,
  kExitIo = 1,
  kExitValidation = 2,
  kExitChecksFailed = 3,
  kExitNumerical = 4,
};

struct SolveArgs {
  std::string problem_file;
  std::string solver_file;
  std::string out_dir;
  bool force = false;
  int jobs = 1;
};

struct SimulateArgs {
  std::string problem_file;
  std::string strategy;  // none | policy:<solve_dir> | schedule:<file> | threshold:<file>
  std::vector<double> x0;
  double t0 = 0.0;
  std::string mc_file;
  std::string out_dir;
};

struct ValidateArgs {
  std::string solution_dir;
  std::vector<std::string> checks;  // subset of dpp,bounds,obstacle,viscosity
  std::string out_dir;
};

int cmd_solve(const SolveArgs& args);
int cmd_simulate(const SimulateArgs& args);
int cmd_validate(const ValidateArgs& args);

}  // namespace qvi
