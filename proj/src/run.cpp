#include "qvi/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/Core>

#include "qvi/assumptions.hpp"
#include "qvi/checks.hpp"
#include "qvi/errors.hpp"
#include "qvi/manifest.hpp"
#include "qvi/problem.hpp"
#include "qvi/sim.hpp"
#include "qvi/solver.hpp"

namespace fs = std::filesystem;

namespace qvi {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out << text;
}

void write_json(const std::string& path, const ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const IntegrityError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const AssumptionError& e) {
    std::fprintf(stderr, "error: assumption failure: %s\n", e.what());
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: validation: %s\n", e.what());
    return kExitValidation;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return kExitValidation;
  } catch (const ExprError& e) {
    std::fprintf(stderr, "error: expression: %s (column %d)\n", e.what(), e.col);
    return kExitValidation;
  } catch (const SolveError& e) {
    std::fprintf(stderr, "error: numerical: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

SampleBox box_from_config(const SolverConfig& cfg) {
  std::vector<double> lo, hi;
  for (const auto& ax : cfg.axes) {
    lo.push_back(ax.lo);
    hi.push_back(ax.hi);
  }
  return SampleBox::from_axes(lo, hi);
}

}  // namespace

int cmd_solve(const SolveArgs& args) {
  return guarded([&]() -> int {
    auto start = std::chrono::steady_clock::now();
    std::string ptext = read_file(args.problem_file);
    std::string stext = read_file(args.solver_file);

    ProblemSpec spec;
    try {
      spec = parse_problem(ptext, true);
    } catch (const AssumptionError& e) {
      if (!args.force) throw;
      std::fprintf(stderr, "warning: %s (--force)\n", e.what());
      spec = parse_problem(ptext, false);
    }
    SolverConfig cfg = SolverConfig::parse(stext);
    if (static_cast<int>(cfg.axes.size()) != spec.dim)
      throw ConfigError("solver grid dimension does not match problem dim");

    AssumptionReport arep =
        validate_assumptions(spec, box_from_config(cfg), 4096, 0);
    if (!arep.passed) {
      std::string msg = "sampled standing-assumption checks failed:";
      for (const auto& c : arep.checks)
        if (c.status == "fail") msg += " A" + std::to_string(c.id) + " " + c.name + ";";
      if (!args.force) throw AssumptionError(msg);
      std::fprintf(stderr, "warning: %s (--force)\n", msg.c_str());
    }

    Eigen::setNbThreads(std::max(1, args.jobs));
    Solution sol = solve_penalized(spec, cfg);

    fs::create_directories(args.out_dir);
    save_solution(sol, args.out_dir);
    write_json((fs::path(args.out_dir) / "problem.json").string(),
               render_problem(spec));
    write_json((fs::path(args.out_dir) / "solver.json").string(), cfg.render());
    write_json((fs::path(args.out_dir) / "assumptions.json").string(),
               arep.to_json());

    ResidualSummary res = qvi_residual(sol, spec, cfg);
    write_json((fs::path(args.out_dir) / "residual.json").string(), res.to_json());

    RunManifest man;
    man.command = "solve";
    man.inputs = {{args.problem_file, content_hash_file(args.problem_file)},
                  {args.solver_file, content_hash_file(args.solver_file)}};
    man.seed = 0;
    man.artifact_dir = args.out_dir;
    man.tool_version = tool_version_string();
    man.wall_clock_s = elapsed_s(start);
    man.resolved = {{"problem", render_problem(spec)},
                    {"solver", cfg.render()},
                    {"force", args.force},
                    {"jobs", args.jobs}};
    man.write((fs::path(args.out_dir) / "manifest.json").string());

    std::printf("solve: converged=%s outer=%d pde_residual=%.3e obstacle_residual=%.3e complementarity=%.3e\n",
                sol.diag.converged ? "yes" : "no", sol.diag.outer_iterations,
                res.r1_max, res.r2_max, res.comp_max);
    return kExitOk;
  });
}

int cmd_simulate(const SimulateArgs& args) {
  return guarded([&]() -> int {
    auto start = std::chrono::steady_clock::now();
    std::string ptext = read_file(args.problem_file);
    std::string mtext = read_file(args.mc_file);
    ProblemSpec spec = parse_problem(ptext, true);
    PathConfig mc = PathConfig::parse(mtext);

    Strategy strat = Strategy::no_action();
    Solution sol;  // must outlive a feedback strategy
    bool has_policy = false;
    std::vector<std::pair<std::string, std::string>> extra_inputs;

    const std::string& s = args.strategy;
    if (s == "none") {
      strat = Strategy::no_action();
    } else if (s.rfind("policy:", 0) == 0) {
      std::string dir = s.substr(7);
      sol = load_solution(dir);
      if (sol.grid.dim() != spec.dim)
        throw ValidationError("policy solution dimension != problem dim");
      if (std::abs(sol.grid.horizon - spec.horizon) > 1e-12)
        throw ValidationError("policy solution horizon != problem horizon");
      strat = Strategy::feedback(sol);
      has_policy = true;
      extra_inputs.emplace_back(dir, content_hash_dir(dir));
    } else if (s.rfind("schedule:", 0) == 0) {
      std::string file = s.substr(9);
      ordered_json j;
      try {
        j = ordered_json::parse(read_file(file));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("schedule file: invalid JSON: ") + e.what());
      }
      if (!j.is_array()) throw ConfigError("schedule file must be a JSON array");
      std::vector<std::pair<double, std::vector<double>>> events;
      for (const auto& e : j) {
        double t = e.at("t").get<double>();
        auto xi = e.at("xi").get<std::vector<double>>();
        if (static_cast<int>(xi.size()) != spec.dim)
          throw ConfigError("schedule impulse dimension != problem dim");
        double norm2 = 0.0;
        for (double v : xi) norm2 += v * v;
        if (norm2 == 0.0) throw ConfigError("schedule impulses must be nonzero");
        events.emplace_back(t, std::move(xi));
      }
      strat = Strategy::fixed_schedule(std::move(events));
      extra_inputs.emplace_back(file, content_hash_file(file));
    } else if (s.rfind("threshold:", 0) == 0) {
      std::string file = s.substr(10);
      ordered_json j;
      try {
        j = ordered_json::parse(read_file(file));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("threshold file: invalid JSON: ") + e.what());
      }
      strat = Strategy::threshold(
          j.at("trigger").get<std::string>(),
          j.at("impulse").get<std::vector<std::string>>(), spec.dim);
      extra_inputs.emplace_back(file, content_hash_file(file));
    } else {
      throw ConfigError("unknown strategy \"" + s +
                        "\" (none | policy:<dir> | schedule:<file> | threshold:<file>)");
    }

    CostEstimate est = estimate_cost(spec, strat, args.x0, args.t0, mc);

    fs::create_directories(args.out_dir);
    ordered_json out;
    out["x0"] = args.x0;
    out["t0"] = args.t0;
    out["strategy"] = args.strategy;
    out["estimate"] = est.to_json();
    if (has_policy) {
      double u0 = solution_value(sol, args.x0, args.t0);
      out["u_solver"] = u0;
      out["gap"] = est.mean - u0;
    }
    write_json((fs::path(args.out_dir) / "estimate.json").string(), out);

    if (mc.record_states) {
      fs::path pdir = fs::path(args.out_dir) / "paths";
      fs::create_directories(pdir);
      for (long i = 0; i < mc.n_paths; ++i) {
        PathRecord rec = simulate_path(spec, strat, args.x0, args.t0, mc, i);
        char name[32];
        std::snprintf(name, sizeof(name), "path_%06ld.csv", i);
        std::ofstream pf(pdir / name, std::ios::binary);
        if (!pf) throw IoError("cannot write path dump");
        pf << "t";
        for (int a = 0; a < spec.dim; ++a) pf << ",x" << a;
        pf << ",event\n";
        for (size_t rrow = 0; rrow < rec.times.size(); ++rrow) {
          pf << format_double(rec.times[rrow]);
          for (int a = 0; a < spec.dim; ++a)
            pf << "," << format_double(rec.states[rrow][a]);
          pf << "," << int(rec.state_flags[rrow]) << "\n";
        }
      }
    }

    RunManifest man;
    man.command = "simulate";
    man.inputs = {{args.problem_file, content_hash_file(args.problem_file)},
                  {args.mc_file, content_hash_file(args.mc_file)}};
    for (auto& e : extra_inputs) man.inputs.push_back(std::move(e));
    man.seed = mc.seed;
    man.artifact_dir = args.out_dir;
    man.tool_version = tool_version_string();
    man.wall_clock_s = elapsed_s(start);
    man.resolved = {{"mc", mc.render()},
                    {"strategy", args.strategy},
                    {"x0", args.x0},
                    {"t0", args.t0}};
    man.write((fs::path(args.out_dir) / "manifest.json").string());

    std::printf("simulate: J_hat=%.8g ci95=%.3g n_paths=%ld%s\n", est.mean,
                est.ci95, est.n_paths, est.unreliable ? " UNRELIABLE" : "");
    return kExitOk;
  });
}

int cmd_validate(const ValidateArgs& args) {
  return guarded([&]() -> int {
    auto start = std::chrono::steady_clock::now();
    Solution sol = load_solution(args.solution_dir);
    ProblemSpec spec = parse_problem(
        read_file((fs::path(args.solution_dir) / "problem.json").string()), true);

    std::vector<std::string> tokens = args.checks;
    if (tokens.empty()) tokens = {"dpp", "bounds", "obstacle", "viscosity"};
    for (const auto& t : tokens)
      if (t != "dpp" && t != "bounds" && t != "obstacle" && t != "viscosity")
        throw ConfigError("unknown check \"" + t +
                          "\" (dpp, bounds, obstacle, viscosity)");

    const Grid& grid = sol.grid;
    std::vector<double> center(grid.dim());
    std::vector<double> lo2(grid.dim()), hi2(grid.dim());
    for (int a = 0; a < grid.dim(); ++a) {
      const auto& ax = grid.space[a];
      center[a] = 0.5 * (ax.lo + ax.hi);
      double w = ax.hi - ax.lo;
      lo2[a] = ax.lo + 0.25 * w;
      hi2[a] = ax.hi - 0.25 * w;
    }

    std::vector<CheckReport> reports;
    for (const auto& t : tokens) {
      if (t == "dpp") {
        PathConfig mc;
        mc.n_paths = 20000;
        mc.dt = 1e-3;
        mc.seed = 0;
        reports.push_back(check_dpp(
            spec, sol, StopRule::fixed_time(0.5 * spec.horizon), center, 0.0, mc));
        reports.push_back(
            check_dpp(spec, sol, StopRule::first_exit(lo2, hi2), center, 0.0, mc));
      } else if (t == "bounds") {
        reports.push_back(check_bounds(sol, spec, 0, 10000));
      } else if (t == "obstacle") {
        reports.push_back(check_obstacle_chain(sol, spec, sol.region_tol));
      } else if (t == "viscosity") {
        reports.push_back(check_viscosity_probe(sol, spec, 0.05, 400, 0));
      }
    }

    fs::create_directories(args.out_dir);
    ordered_json arr = ordered_json::array();
    bool any_fail = false;
    for (const auto& r : reports) {
      arr.push_back(r.to_json());
      any_fail = any_fail || r.status == "fail";
      std::printf("check %-10s %s (margin=%.4g)\n", r.id.c_str(),
                  r.status.c_str(), r.margin);
    }
    write_json((fs::path(args.out_dir) / "checks.json").string(), arr);

    RunManifest man;
    man.command = "validate";
    man.inputs = {{args.solution_dir, content_hash_dir(args.solution_dir)}};
    man.seed = 0;
    man.artifact_dir = args.out_dir;
    man.tool_version = tool_version_string();
    man.wall_clock_s = elapsed_s(start);
    ordered_json toks = ordered_json::array();
    for (const auto& t : tokens) toks.push_back(t);
    man.resolved = {{"checks", toks}};
    man.write((fs::path(args.out_dir) / "manifest.json").string());

    return any_fail ? kExitChecksFailed : kExitOk;
  });
}

}  // namespace qvi
