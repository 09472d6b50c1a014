#include "qvi/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>

#include "qvi/assumptions.hpp"
#include "qvi/errors.hpp"
#include "qvi/penalty.hpp"

namespace fs = std::filesystem;

namespace qvi {

namespace {

using ordered_json = nlohmann::ordered_json;
using SpMat = Eigen::SparseMatrix<double>;
using Solver = Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>>;

const ordered_json& require(const ordered_json& j, const std::string& key,
                            const char* where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ConfigError(std::string(where) + ": missing key \"" + key + "\"");
  return *it;
}

double require_number(const ordered_json& j, const std::string& key,
                      const char* where) {
  const ordered_json& v = require(j, key, where);
  if (!v.is_number())
    throw ConfigError(std::string(where) + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

double opt_number(const ordered_json& j, const std::string& key, double dflt) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_number())
    throw ConfigError("solver config: \"" + key + "\" must be a number");
  return it->get<double>();
}

int opt_int(const ordered_json& j, const std::string& key, int dflt) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_number_integer())
    throw ConfigError("solver config: \"" + key + "\" must be an integer");
  return it->get<int>();
}

bool vec_uses_t(const VectorFn& v) {
  for (const auto& c : v.comp)
    if (c.uses_t()) return true;
  return false;
}

Eigen::VectorXd solve_system(const SpMat& A, const Eigen::VectorXd& rhs,
                             const Eigen::VectorXd& guess, double tol,
                             int max_iter, int* linear_solves) {
  Solver solver;
  solver.preconditioner().setDroptol(1e-12);
  solver.preconditioner().setFillfactor(20);
  solver.setTolerance(tol);
  solver.setMaxIterations(max_iter);
  solver.compute(A);
  if (solver.info() != Eigen::Success)
    throw SolveError("linear solver setup failed (singular step matrix?)");
  Eigen::VectorXd x = solver.solveWithGuess(rhs, guess);
  if (linear_solves) ++*linear_solves;
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "linear solver did not converge, relative residual " << solver.error();
    throw SolveError(os.str());
  }
  return x;
}

struct StepMatrix {
  SpMat S;                         // 1/dt on interior diagonal + generator rows
  Eigen::VectorXd boundary_rhs;
  std::vector<uint8_t> is_boundary;
};

StepMatrix build_step(const Grid& grid, const ProblemSpec& spec, double t_orig,
                      const BoundaryRule& rule, double slice_s) {
  OperatorMatrix om = assemble_generator(grid, spec, t_orig, rule, slice_s);
  StepMatrix sm;
  sm.boundary_rhs = std::move(om.boundary_rhs);
  sm.is_boundary = std::move(om.is_boundary);
  const double inv_dt = 1.0 / grid.dt();
  SpMat eye(om.L.rows(), om.L.cols());
  {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(om.L.rows()));
    for (int i = 0; i < om.L.rows(); ++i)
      if (!sm.is_boundary[static_cast<std::size_t>(i)])
        trips.emplace_back(i, i, inv_dt);
    eye.setFromTriplets(trips.begin(), trips.end());
  }
  sm.S = om.L + eye;
  sm.S.makeCompressed();
  return sm;
}

// Interior right-hand side u_prev/dt + f + I u_prev at original time t.
Eigen::VectorXd step_rhs(const Grid& grid, const ProblemSpec& spec,
                         const StepMatrix& sm, const Field& u_prev,
                         double t_orig, const SolverConfig& cfg) {
  const size_t N = grid.node_count();
  Eigen::VectorXd rhs(N);
  const double inv_dt = 1.0 / grid.dt();
  Field iu;
  const bool jumps = !spec.jumps.empty();
  if (jumps) {
    QuadratureConfig quad;
    quad.nodes = cfg.quad_nodes;
    quad.extension_margin = cfg.extension_margin;
    iu = apply_I(u_prev, spec, t_orig, cfg.theta, u_prev, quad);
  }
  std::vector<double> x(grid.dim());
  for (size_t i = 0; i < N; ++i) {
    if (sm.is_boundary[i]) {
      rhs[i] = sm.boundary_rhs[i];
      continue;
    }
    grid.node_point(i, x.data());
    rhs[i] = u_prev.v[i] * inv_dt + spec.eval_f(x.data(), t_orig);
    if (jumps) rhs[i] += iu.v[i];
  }
  return rhs;
}

double inf_norm(const Eigen::VectorXd& v) { return v.lpNorm<Eigen::Infinity>(); }

// One implicit slice step with the penalty term, solved by Newton with
// backtracking.  Returns the new slice; accumulates beta statistics.
Field newton_step(const Grid& grid, const StepMatrix& sm,
                  const Eigen::VectorXd& rhs, const Field& psi,
                  const PenaltyFamily& beta, const Field& start,
                  const SolverConfig& cfg, SolutionDiagnostics& diag,
                  double* beta_max) {
  const size_t N = grid.node_count();
  Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(start.v.data(), N);

  auto residual = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd r = sm.S * w - rhs;
    for (size_t i = 0; i < N; ++i)
      if (!sm.is_boundary[i]) r[i] += beta.value(w[i] - psi.v[i]);
    return r;
  };

  const double scale = std::max(1.0, inf_norm(rhs));
  Eigen::VectorXd G = residual(u);
  double gnorm = inf_norm(G);
  int it = 0;
  for (; it < cfg.newton_max_iter && gnorm > cfg.newton_tol * scale; ++it) {
    SpMat J = sm.S;
    for (size_t i = 0; i < N; ++i)
      if (!sm.is_boundary[i])
        J.coeffRef(static_cast<int>(i), static_cast<int>(i)) +=
            beta.deriv(u[i] - psi.v[i]);
    const Eigen::VectorXd d = solve_system(J, -G, Eigen::VectorXd::Zero(N),
                                           cfg.linear_tol, cfg.linear_max_iter,
                                           &diag.linear_solves);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      Eigen::VectorXd trial = u + alpha * d;
      Eigen::VectorXd Gt = residual(trial);
      const double gn = inf_norm(Gt);
      if (gn <= (1.0 - 1e-4 * alpha) * gnorm || gn <= cfg.newton_tol * scale) {
        u = std::move(trial);
        G = std::move(Gt);
        gnorm = gn;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) throw SolveError("Newton line search exhausted");
    if (alpha * inf_norm(d) <= 1e-15 * std::max(1.0, inf_norm(u))) break;
  }
  diag.newton_iterations_total += it;
  if (gnorm > cfg.newton_tol * scale) {
    std::ostringstream os;
    os << "Newton did not converge: residual " << gnorm << " after "
       << cfg.newton_max_iter << " iterations";
    throw SolveError(os.str());
  }

  Field out(grid, psi.slice);
  for (size_t i = 0; i < N; ++i) out.v[i] = u[i];
  if (beta_max) {
    for (size_t i = 0; i < N; ++i)
      if (!sm.is_boundary[i])
        *beta_max = std::max(*beta_max, std::abs(beta.value(u[i] - psi.v[i])));
  }
  return out;
}

Field initial_slice(const Grid& grid, const ProblemSpec& spec) {
  Field u0(grid, 0);
  std::vector<double> x(grid.dim());
  for (size_t i = 0; i < grid.node_count(); ++i) {
    grid.node_point(i, x.data());
    u0.v[i] = spec.eval_g(x.data());
  }
  return u0;
}

std::vector<double> derive_search_radius(const Grid& grid, const ProblemSpec& spec,
                                         const std::vector<Field>& u0) {
  double umax = u0.front().v.front();
  for (const Field& f : u0)
    for (double v : f.v) umax = std::max(umax, v);
  std::vector<double> lo(grid.dim()), hi(grid.dim());
  for (int a = 0; a < grid.dim(); ++a) {
    lo[a] = grid.space[a].lo;
    hi[a] = grid.space[a].hi;
  }
  const double chat = estimate_impulse_cost_growth(
      spec, SampleBox::from_axes(lo, hi), 4096, 0);
  if (!(chat > 1e-12))
    throw SolveError(
        "impulse cost growth estimate is not positive; set search_radius "
        "explicitly in the solver config");
  const double gain = std::max(0.0, umax + spec.constants.L_bound);
  const double r = std::pow(gain / chat, 1.0 / spec.constants.mu);
  std::vector<double> radius(grid.dim());
  for (int a = 0; a < grid.dim(); ++a) {
    const double width = grid.space[a].hi - grid.space[a].lo;
    radius[a] = std::min(r, width);
    radius[a] = std::max(radius[a], grid.space[a].h());
  }
  return radius;
}

}  // namespace

SolverConfig SolverConfig::parse(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("solver config: ") + e.what());
  }
  return from_json(j);
}

SolverConfig SolverConfig::from_json(const ordered_json& j) {
  SolverConfig cfg;
  const ordered_json& grid = require(j, "grid", "solver config");
  const ordered_json& space = require(grid, "space", "solver config grid");
  if (!space.is_array() || space.empty())
    throw ConfigError("solver config: grid.space must be a non-empty array");
  for (const auto& axj : space) {
    Axis ax;
    ax.lo = require_number(axj, "lo", "grid axis");
    ax.hi = require_number(axj, "hi", "grid axis");
    const double cnt = require_number(axj, "count", "grid axis");
    ax.count = static_cast<int>(cnt);
    if (ax.count != cnt || ax.count < 3)
      throw ConfigError("solver config: axis count must be an integer >= 3");
    if (!(ax.hi > ax.lo))
      throw ConfigError("solver config: axis needs hi > lo");
    cfg.axes.push_back(ax);
  }
  const double tc = require_number(grid, "time_count", "solver config grid");
  cfg.time_count = static_cast<int>(tc);
  if (cfg.time_count != tc || cfg.time_count < 2)
    throw ConfigError("solver config: time_count must be an integer >= 2");

  const ordered_json& sched = require(j, "epsilon_schedule", "solver config");
  if (!sched.is_array() || sched.empty())
    throw ConfigError("solver config: epsilon_schedule must be a non-empty array");
  for (const auto& e : sched) {
    if (!e.is_number() || !(e.get<double>() > 0.0))
      throw ConfigError("solver config: epsilon_schedule entries must be positive");
    cfg.epsilon_schedule.push_back(e.get<double>());
  }
  for (std::size_t i = 1; i < cfg.epsilon_schedule.size(); ++i)
    if (!(cfg.epsilon_schedule[i] < cfg.epsilon_schedule[i - 1]))
      throw ConfigError("solver config: epsilon_schedule must be strictly decreasing");

  cfg.theta = opt_number(j, "theta", cfg.theta);
  if (cfg.theta < 0.0) throw ConfigError("solver config: theta must be >= 0");
  cfg.newton_tol = opt_number(j, "newton_tol", cfg.newton_tol);
  cfg.newton_max_iter = opt_int(j, "newton_max_iter", cfg.newton_max_iter);
  cfg.obstacle_tol = opt_number(j, "obstacle_tol", cfg.obstacle_tol);
  cfg.obstacle_max_iter = opt_int(j, "obstacle_max_iter", cfg.obstacle_max_iter);
  cfg.region_tol = opt_number(j, "region_tol", cfg.region_tol);
  cfg.linear_tol = opt_number(j, "linear_tol", cfg.linear_tol);
  cfg.linear_max_iter = opt_int(j, "linear_max_iter", cfg.linear_max_iter);
  cfg.quad_nodes = opt_int(j, "quad_nodes", cfg.quad_nodes);
  cfg.extension_margin = opt_number(j, "extension_margin", cfg.extension_margin);
  if (!(cfg.newton_tol > 0.0) || !(cfg.obstacle_tol > 0.0) ||
      !(cfg.region_tol > 0.0) || !(cfg.linear_tol > 0.0))
    throw ConfigError("solver config: tolerances must be positive");
  if (cfg.newton_max_iter < 1 || cfg.obstacle_max_iter < 1 ||
      cfg.linear_max_iter < 1 || cfg.quad_nodes < 8)
    throw ConfigError("solver config: iteration/node counts out of range");
  if (!(cfg.extension_margin > 0.0))
    throw ConfigError("solver config: extension_margin must be positive");

  if (auto it = j.find("search_radius"); it != j.end()) {
    if (!it->is_array())
      throw ConfigError("solver config: search_radius must be an array");
    for (const auto& r : *it) {
      if (!r.is_number() || !(r.get<double>() > 0.0))
        throw ConfigError("solver config: search_radius entries must be positive");
      cfg.search_radius.push_back(r.get<double>());
    }
    if (cfg.search_radius.size() != cfg.axes.size())
      throw ConfigError("solver config: search_radius length != grid dimension");
  }
  return cfg;
}

ordered_json SolverConfig::render() const {
  ordered_json j;
  ordered_json space = ordered_json::array();
  for (const Axis& ax : axes)
    space.push_back({{"lo", ax.lo}, {"hi", ax.hi}, {"count", ax.count}});
  j["grid"] = {{"space", space}, {"time_count", time_count}};
  j["epsilon_schedule"] = epsilon_schedule;
  j["theta"] = theta;
  j["newton_tol"] = newton_tol;
  j["newton_max_iter"] = newton_max_iter;
  j["obstacle_tol"] = obstacle_tol;
  j["obstacle_max_iter"] = obstacle_max_iter;
  j["region_tol"] = region_tol;
  j["linear_tol"] = linear_tol;
  j["linear_max_iter"] = linear_max_iter;
  j["quad_nodes"] = quad_nodes;
  j["extension_margin"] = extension_margin;
  if (!search_radius.empty()) j["search_radius"] = search_radius;
  return j;
}

Grid make_grid(const SolverConfig& cfg, const ProblemSpec& spec) {
  if (static_cast<int>(cfg.axes.size()) != spec.dim)
    throw ConfigError("solver grid dimension does not match the problem");
  return Grid(cfg.axes, cfg.time_count, spec.horizon);
}

std::vector<Field> solve_linear(const ProblemSpec& spec, const Grid& grid,
                                const Field& initial, const BoundaryRule& rule,
                                const SolverConfig& cfg) {
  const bool time_dep = vec_uses_t(spec.drift) || spec.diffusion.uses_t();
  const bool reassemble = time_dep || rule.kind == BoundaryRule::kDirichlet;
  const size_t N = grid.node_count();
  std::vector<Field> out;
  out.reserve(grid.time_count);
  Field u0 = initial;
  u0.slice = 0;
  out.push_back(std::move(u0));

  StepMatrix sm;
  int dummy = 0;
  for (int k = 1; k < grid.time_count; ++k) {
    const double s = grid.slice_time(k);
    const double t_orig = grid.horizon - s;
    if (k == 1 || reassemble) sm = build_step(grid, spec, t_orig, rule, s);
    const Eigen::VectorXd rhs = step_rhs(grid, spec, sm, out.back(), t_orig, cfg);
    const Eigen::VectorXd guess =
        Eigen::Map<const Eigen::VectorXd>(out.back().v.data(), N);
    const Eigen::VectorXd u =
        solve_system(sm.S, rhs, guess, cfg.linear_tol, cfg.linear_max_iter, &dummy);
    Field f(grid, k);
    for (size_t i = 0; i < N; ++i) f.v[i] = u[i];
    out.push_back(std::move(f));
  }
  return out;
}

Solution solve_penalized(const ProblemSpec& spec, const SolverConfig& cfg) {
  const Grid grid = make_grid(cfg, spec);
  const BoundaryRule rule;  // growth tracking
  const Field init = initial_slice(grid, spec);

  Solution sol;
  sol.grid = grid;
  sol.region_tol = cfg.region_tol;

  // Unconstrained march seeds the obstacle fixed point.
  std::vector<Field> u_cur = solve_linear(spec, grid, init, rule, cfg);

  sol.search_radius =
      cfg.search_radius.empty() ? derive_search_radius(grid, spec, u_cur)
                                : cfg.search_radius;

  const bool time_dep = vec_uses_t(spec.drift) || spec.diffusion.uses_t();
  std::vector<StepMatrix> sms;  // cached step matrices when reusable
  if (!time_dep)
    sms.push_back(build_step(grid, spec, 0.0, rule, 0.0));
  else {
    sms.resize(grid.time_count);
    for (int k = 1; k < grid.time_count; ++k) {
      const double s = grid.slice_time(k);
      sms[k] = build_step(grid, spec, grid.horizon - s, rule, s);
    }
  }
  auto step_for = [&](int k) -> const StepMatrix& {
    return time_dep ? sms[k] : sms.front();
  };

  double delta = 0.0;
  bool converged = false;
  int outer = 0;
  for (outer = 1; outer <= cfg.obstacle_max_iter; ++outer) {
    // Freeze the obstacle from the previous iterate.
    std::vector<Field> psi;
    psi.reserve(grid.time_count);
    for (int k = 0; k < grid.time_count; ++k) {
      const double t_orig = grid.horizon - grid.slice_time(k);
      psi.push_back(apply_M(u_cur[k], spec, t_orig, sol.search_radius).mu);
    }

    sol.diag.penalty_max.clear();
    std::vector<Field> sweep = u_cur;  // warm start for the first epsilon
    for (double eps : cfg.epsilon_schedule) {
      const PenaltyFamily beta{eps};
      double beta_max = 0.0;
      std::vector<Field> next;
      next.reserve(grid.time_count);
      next.push_back(init);
      for (int k = 1; k < grid.time_count; ++k) {
        const double t_orig = grid.horizon - grid.slice_time(k);
        const Eigen::VectorXd rhs =
            step_rhs(grid, spec, step_for(k), next[k - 1], t_orig, cfg);
        next.push_back(newton_step(grid, step_for(k), rhs, psi[k], beta,
                                   sweep[k], cfg, sol.diag, &beta_max));
      }
      sol.diag.penalty_max.emplace_back(eps, beta_max);
      sweep = std::move(next);
    }

    delta = 0.0;
    for (int k = 0; k < grid.time_count; ++k)
      for (size_t i = 0; i < grid.node_count(); ++i)
        delta = std::max(delta, std::abs(sweep[k].v[i] - u_cur[k].v[i]));
    u_cur = std::move(sweep);
    if (delta < cfg.obstacle_tol) {
      converged = true;
      break;
    }
  }
  sol.diag.converged = converged;
  sol.diag.outer_iterations = std::min(outer, cfg.obstacle_max_iter);
  sol.diag.obstacle_delta = delta;

  sol.u = std::move(u_cur);
  // Final intervention operator application defines regions and the policy.
  sol.mu.clear();
  sol.impulse.clear();
  sol.action.assign(grid.time_count,
                    std::vector<uint8_t>(grid.node_count(), 0));
  for (int k = 0; k < grid.time_count; ++k) {
    const double t_orig = grid.horizon - grid.slice_time(k);
    MResult mr = apply_M(sol.u[k], spec, t_orig, sol.search_radius);
    for (size_t i = 0; i < grid.node_count(); ++i)
      sol.action[k][i] = (mr.mu.v[i] - sol.u[k].v[i] <= cfg.region_tol) ? 1 : 0;
    sol.mu.push_back(std::move(mr.mu));
    sol.impulse.push_back(std::move(mr.xi));
  }
  return sol;
}

void ensure_mu(Solution& sol, const ProblemSpec& spec) {
  if (sol.mu.size() == sol.u.size()) return;
  sol.mu.clear();
  for (int k = 0; k < sol.grid.time_count; ++k) {
    const double t_orig = sol.grid.horizon - sol.grid.slice_time(k);
    sol.mu.push_back(apply_M(sol.u[k], spec, t_orig, sol.search_radius).mu);
  }
}

void extract_regions(Solution& sol, const ProblemSpec& spec, double region_tol) {
  ensure_mu(sol, spec);
  sol.region_tol = region_tol;
  sol.action.assign(sol.grid.time_count,
                    std::vector<uint8_t>(sol.grid.node_count(), 0));
  for (int k = 0; k < sol.grid.time_count; ++k)
    for (size_t i = 0; i < sol.grid.node_count(); ++i)
      sol.action[k][i] =
          (sol.mu[k].v[i] - sol.u[k].v[i] <= region_tol) ? 1 : 0;
}

ResidualSummary qvi_residual(const Solution& sol, const ProblemSpec& spec,
                             const SolverConfig& cfg) {
  const Grid& grid = sol.grid;
  ResidualSummary rs;
  Solution& mut = const_cast<Solution&>(sol);
  ensure_mu(mut, spec);
  QuadratureConfig quad;
  quad.nodes = cfg.quad_nodes;
  quad.extension_margin = cfg.extension_margin;
  const bool jumps = !spec.jumps.empty();
  std::vector<double> x(grid.dim());
  for (int k = 1; k < grid.time_count; ++k) {
    const double t_orig = grid.horizon - grid.slice_time(k);
    const Field lu = apply_L(sol.u[k], spec, t_orig);
    Field iu;
    if (jumps) iu = apply_I(sol.u[k], spec, t_orig, cfg.theta, sol.u[k], quad);
    for (size_t i = 0; i < grid.node_count(); ++i) {
      const std::vector<int> multi = grid.multi_index(i);
      if (grid.on_boundary(multi)) continue;
      grid.node_point(i, x.data());
      double d1 = (sol.u[k].v[i] - sol.u[k - 1].v[i]) / grid.dt() + lu.v[i] -
                  spec.eval_f(x.data(), t_orig);
      if (jumps) d1 -= iu.v[i];
      const double d2 = sol.u[k].v[i] - sol.mu[k].v[i];
      if (sol.action[k][i])
        rs.r2_max = std::max(rs.r2_max, std::abs(d2));
      else
        rs.r1_max = std::max(rs.r1_max, std::abs(d1));
      rs.comp_max = std::max(rs.comp_max, std::min(std::abs(d1), std::abs(d2)));
    }
  }
  return rs;
}

ordered_json SolutionDiagnostics::to_json() const {
  ordered_json j;
  j["converged"] = converged;
  j["outer_iterations"] = outer_iterations;
  j["obstacle_delta"] = obstacle_delta;
  ordered_json pm = ordered_json::array();
  for (const auto& [eps, v] : penalty_max)
    pm.push_back({{"epsilon", eps}, {"beta_max", v}});
  j["penalty_max"] = pm;
  j["newton_iterations_total"] = newton_iterations_total;
  j["linear_solves"] = linear_solves;
  return j;
}

SolutionDiagnostics SolutionDiagnostics::from_json(const ordered_json& j) {
  SolutionDiagnostics d;
  d.converged = j.value("converged", false);
  d.outer_iterations = j.value("outer_iterations", 0);
  d.obstacle_delta = j.value("obstacle_delta", 0.0);
  if (auto it = j.find("penalty_max"); it != j.end() && it->is_array())
    for (const auto& e : *it)
      d.penalty_max.emplace_back(e.value("epsilon", 0.0), e.value("beta_max", 0.0));
  d.newton_iterations_total = j.value("newton_iterations_total", 0);
  d.linear_solves = j.value("linear_solves", 0);
  return d;
}

ordered_json ResidualSummary::to_json() const {
  return ordered_json{{"r1_max", r1_max}, {"r2_max", r2_max}, {"comp_max", comp_max}};
}

void save_solution(const Solution& sol, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "slices", ec);
  fs::create_directories(fs::path(dir) / "masks", ec);
  fs::create_directories(fs::path(dir) / "impulse", ec);
  if (ec) throw IoError("cannot create output directory " + dir);

  write_grid_json((fs::path(dir) / "grid.json").string(), sol.grid);
  char name[32];
  for (int k = 0; k < sol.grid.time_count; ++k) {
    std::snprintf(name, sizeof name, "u_%04d.csv", k);
    write_field_csv((fs::path(dir) / "slices" / name).string(), sol.u[k]);
    std::snprintf(name, sizeof name, "mask_%04d.csv", k);
    write_mask_csv((fs::path(dir) / "masks" / name).string(), sol.grid,
                   sol.action[k]);
    std::snprintf(name, sizeof name, "xi_%04d.csv", k);
    write_impulse_csv((fs::path(dir) / "impulse" / name).string(), sol.impulse[k]);
  }

  ordered_json j;
  j["slices"] = sol.grid.time_count;
  j["search_radius"] = sol.search_radius;
  j["region_tol"] = sol.region_tol;
  j["diagnostics"] = sol.diag.to_json();
  std::ofstream out(fs::path(dir) / "summary.json");
  if (!out) throw IoError("cannot write " + dir + "/summary.json");
  out << j.dump(2) << "\n";
}

Solution load_solution(const std::string& dir) {
  Solution sol;
  const fs::path root(dir);
  if (!fs::exists(root / "grid.json"))
    throw IoError("no solution at " + dir + " (missing grid.json)");
  sol.grid = read_grid_json((root / "grid.json").string());

  std::ifstream in(root / "summary.json");
  if (!in) throw IoError("missing " + dir + "/summary.json");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IntegrityError(std::string("artifact integrity: summary.json: ") + e.what());
  }
  if (j.value("slices", 0) != sol.grid.time_count)
    throw IntegrityError("artifact integrity: summary slice count != grid");
  if (auto it = j.find("search_radius"); it != j.end())
    for (const auto& r : *it) sol.search_radius.push_back(r.get<double>());
  sol.region_tol = j.value("region_tol", 0.0);
  if (auto it = j.find("diagnostics"); it != j.end())
    sol.diag = SolutionDiagnostics::from_json(*it);

  char name[32];
  for (int k = 0; k < sol.grid.time_count; ++k) {
    std::snprintf(name, sizeof name, "u_%04d.csv", k);
    sol.u.push_back(read_field_csv((root / "slices" / name).string(), sol.grid, k));
    std::snprintf(name, sizeof name, "mask_%04d.csv", k);
    sol.action.push_back(read_mask_csv((root / "masks" / name).string(), sol.grid));
    std::snprintf(name, sizeof name, "xi_%04d.csv", k);
    sol.impulse.push_back(
        read_impulse_csv((root / "impulse" / name).string(), sol.grid, k));
  }
  return sol;
}

}  // namespace qvi
