#include "qvi/checks.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <Eigen/Dense>

#include "qvi/rng.hpp"

namespace qvi {

namespace {

using ordered_json = nlohmann::ordered_json;

double euclid(const double* x, int n) {
  double s = 0.0;
  for (int a = 0; a < n; ++a) s += x[a] * x[a];
  return std::sqrt(s);
}

/// Value with the growth-tracking extension outside the box:
/// u(y) ~ u(clamp y) + g(y) - g(clamp y).
double extended_value(const Field& u, const ProblemSpec& spec, const double* y) {
  const Grid& g = u.grid;
  std::vector<double> yc(g.dim());
  g.clamp(y, yc.data());
  double v = u.interpolate(yc.data());
  bool moved = false;
  for (int a = 0; a < g.dim(); ++a) moved = moved || yc[a] != y[a];
  if (moved) v += spec.eval_g(y) - spec.eval_g(yc.data());
  return v;
}

int nearest_slice(const Grid& g, double t_orig) {
  double s = g.horizon - t_orig;
  int k = static_cast<int>(std::lround(s / g.dt()));
  return std::min(std::max(k, 0), g.time_count - 1);
}

// 8-point Gauss-Legendre on [0, 1].
const double kGlX[8] = {0.01985507175123188, 0.10166676129318664,
                        0.2372337950418355,  0.40828267875217505,
                        0.59171732124782495, 0.7627662049581645,
                        0.89833323870681336, 0.98014492824876812};
const double kGlW[8] = {0.05061426814518813, 0.11119051722668724,
                        0.15685332293894364, 0.18134189168918099,
                        0.18134189168918099, 0.15685332293894364,
                        0.11119051722668724, 0.05061426814518813};

}  // namespace

ordered_json CheckReport::to_json() const {
  ordered_json j;
  j["id"] = id;
  j["status"] = status;
  j["margin"] = margin;
  j["tolerances"] = tolerances;
  j["witnesses"] = witnesses;
  j["details"] = details;
  return j;
}

CheckReport CheckReport::from_json(const ordered_json& j) {
  CheckReport r;
  r.id = j.at("id").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.margin = j.at("margin").get<double>();
  r.tolerances = j.at("tolerances");
  r.witnesses = j.at("witnesses");
  r.details = j.at("details");
  return r;
}

CheckReport check_dpp(const ProblemSpec& spec, const Solution& sol,
                      const StopRule& stop, const std::vector<double>& x0,
                      double t0, const PathConfig& cfg, double c_disc) {
  const Grid& grid = sol.grid;
  const int n = grid.dim();
  const double T = spec.horizon, r = spec.discount;
  Strategy strat = Strategy::feedback(sol);

  const long np = cfg.n_paths;
  std::vector<double> vals(np, 0.0);
  std::vector<uint8_t> oob(np, 0);

  auto worker = [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      PathRecord rec = simulate_path(spec, strat, x0, t0, cfg, i, stop);
      double tau = rec.stop_time;
      const double* xs = rec.stop_state.data();
      double disc = (r == 0.0) ? 1.0 : std::exp(-r * (tau - t0));
      double tail;
      if (tau >= T - 1e-12) {
        // At the horizon the continuation value is the terminal cost itself.
        tail = spec.eval_g(xs);
      } else {
        int k = nearest_slice(grid, tau);
        tail = extended_value(sol.u[k], spec, xs);
        if (!grid.inside(xs)) oob[i] = 1;
      }
      if (rec.flagged_overflow || rec.flagged_budget) oob[i] = 1;
      vals[i] = rec.running_cost + rec.intervention_cost + disc * tail;
    }
  };

  int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    worker(0, np);
  } else {
    std::vector<std::thread> pool;
    long chunk = (np + jobs - 1) / jobs;
    for (int w = 0; w < jobs; ++w) {
      long lo = w * chunk, hi = std::min<long>(np, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  double mean = 0.0;
  long n_oob = 0;
  for (long i = 0; i < np; ++i) {
    mean += vals[i];
    n_oob += oob[i];
  }
  mean /= np;
  double var = 0.0;
  for (long i = 0; i < np; ++i) {
    double d = vals[i] - mean;
    var += d * d;
  }
  var = np > 1 ? var / (np - 1) : 0.0;
  double ci95 = 1.959963984540054 * std::sqrt(var / np);

  double hmax = 0.0;
  for (const auto& ax : grid.space) hmax = std::max(hmax, ax.h());
  double disc_term = c_disc * (hmax * hmax + grid.dt() + cfg.dt);
  double tol = ci95 + disc_term;

  double u0 = solution_value(sol, x0, t0);
  double residual = std::abs(mean - u0);
  double oob_frac = static_cast<double>(n_oob) / np;

  CheckReport rep;
  rep.id = "dpp";
  rep.margin = tol - residual;
  rep.status = oob_frac > 0.01 ? "inconclusive"
                               : (residual <= tol ? "pass" : "fail");
  rep.tolerances = {{"ci95", ci95},
                    {"disc_term", disc_term},
                    {"tol_dpp", tol},
                    {"c_disc", c_disc}};
  rep.witnesses = {{"x0", x0},
                   {"t0", t0},
                   {"stop",
                    stop.kind == StopRule::Kind::FixedTime
                        ? ordered_json{{"kind", "fixed_time"}, {"s", stop.s}}
                        : (stop.kind == StopRule::Kind::FirstExit
                               ? ordered_json{{"kind", "first_exit"},
                                              {"lo", stop.lo},
                                              {"hi", stop.hi}}
                               : ordered_json{{"kind", "none"}})}};
  rep.details = {{"rhs_mean", mean},       {"u_solver", u0},
                 {"residual", residual},   {"n_paths", np},
                 {"dt", cfg.dt},           {"oob_frac", oob_frac},
                 {"dim", n}};
  return rep;
}

CheckReport check_bounds(const Solution& sol, const ProblemSpec& spec,
                         uint64_t seed, int n_pairs) {
  const Grid& grid = sol.grid;
  const int n = grid.dim(), K = grid.time_count;
  const size_t N = grid.node_count();
  const double T = spec.horizon;
  const double gamma = spec.constants.gamma, delta = spec.constants.delta,
               mu = spec.constants.mu;

  double c_low = 0.0, c_up = 0.0;
  bool finite = true;
  ordered_json witness;
  std::vector<double> x(n);
  for (int k = 0; k < K && finite; ++k) {
    for (size_t i = 0; i < N; ++i) {
      double v = sol.u[k][i];
      if (!std::isfinite(v)) {
        finite = false;
        witness = {{"slice", k}, {"node", i}, {"value", v}};
        break;
      }
      grid.node_point(i, x.data());
      double nx = euclid(x.data(), n);
      c_low = std::max(c_low, std::max(0.0, -v) / (T + 1.0));
      c_up = std::max(c_up, std::max(0.0, v) / (1.0 + std::pow(nx, gamma + delta)));
    }
  }

  // Hoelder quotients, max over sampled pairs (the lemma is a uniform bound).
  double c_x = 0.0, c_t = 0.0;
  if (finite) {
    RngStream rs(seed, RngStream::kChecks, 1);
    std::vector<double> y(n);
    for (int p = 0; p < n_pairs; ++p) {
      int k = rs.uniform_index(K);
      size_t i = static_cast<size_t>(rs.uniform_index(static_cast<int>(N)));
      size_t j = static_cast<size_t>(rs.uniform_index(static_cast<int>(N)));
      if (i == j) continue;
      grid.node_point(i, x.data());
      grid.node_point(j, y.data());
      double dx = 0.0;
      for (int a = 0; a < n; ++a) dx += (x[a] - y[a]) * (x[a] - y[a]);
      dx = std::sqrt(dx);
      double denom = (1.0 + std::pow(euclid(x.data(), n), gamma) +
                      std::pow(euclid(y.data(), n), gamma)) *
                     std::pow(dx, delta);
      c_x = std::max(c_x, std::abs(sol.u[k][i] - sol.u[k][j]) / denom);
    }
    RngStream rt(seed, RngStream::kChecks, 2);
    for (int p = 0; p < n_pairs; ++p) {
      size_t i = static_cast<size_t>(rt.uniform_index(static_cast<int>(N)));
      int k = rt.uniform_index(K);
      int m = rt.uniform_index(K);
      if (k == m) continue;
      grid.node_point(i, x.data());
      double dtk = std::abs(grid.slice_time(k) - grid.slice_time(m));
      double denom = (1.0 + 2.0 * std::pow(euclid(x.data(), n), mu)) *
                     std::pow(dtk, delta / 2.0);
      c_t = std::max(c_t, std::abs(sol.u[k][i] - sol.u[m][i]) / denom);
    }
    finite = std::isfinite(c_low) && std::isfinite(c_up) &&
             std::isfinite(c_x) && std::isfinite(c_t);
  }

  CheckReport rep;
  rep.id = "bounds";
  rep.status = finite ? "pass" : "fail";
  rep.margin = finite ? 1.0 : -1.0;
  rep.tolerances = {{"criterion", "all fitted constants finite"}};
  rep.witnesses = witness;
  rep.details = {{"C_low", c_low}, {"C_up", c_up},   {"C_x", c_x},
                 {"C_t", c_t},     {"n_pairs", n_pairs},
                 {"gamma", gamma}, {"delta", delta}, {"mu", mu}};
  return rep;
}

CheckReport check_obstacle_chain(Solution& sol, const ProblemSpec& spec,
                                 double region_tol) {
  ensure_mu(sol, spec);
  const Grid& grid = sol.grid;
  const int n = grid.dim(), K = grid.time_count;
  const size_t N = grid.node_count();

  double scale = 1.0;
  for (int k = 0; k < K; ++k)
    for (size_t i = 0; i < N; ++i) scale = std::max(scale, std::abs(sol.u[k][i]));

  // (a) u <= M-hat u everywhere.
  double min_gap = std::numeric_limits<double>::infinity();
  int wa_k = 0;
  size_t wa_i = 0;
  for (int k = 0; k < K; ++k)
    for (size_t i = 0; i < N; ++i) {
      double gap = sol.mu[k][i] - sol.u[k][i];
      if (gap < min_gap) {
        min_gap = gap;
        wa_k = k;
        wa_i = i;
      }
    }
  double tol_a = 1e-6 * scale;
  double margin_a = min_gap + tol_a;

  // (b) destination margin K/2 at every action node.
  double half_k = 0.5 * spec.constants.K;
  double min_dest = std::numeric_limits<double>::infinity();
  long n_action = 0;
  int wb_k = 0;
  size_t wb_i = 0;
  std::vector<double> x(n), dest(n), dc(n);
  for (int k = 0; k < K; ++k) {
    if (sol.action.empty()) break;
    for (size_t i = 0; i < N; ++i) {
      if (!sol.action[k][i]) continue;
      ++n_action;
      grid.node_point(i, x.data());
      const double* xi = sol.impulse[k].get(i);
      for (int a = 0; a < n; ++a) dest[a] = x[a] + xi[a];
      grid.clamp(dest.data(), dc.data());
      double gap = sol.mu[k].interpolate(dc.data()) - sol.u[k].interpolate(dc.data());
      if (gap < min_dest) {
        min_dest = gap;
        wb_k = k;
        wb_i = i;
      }
    }
  }
  bool vacuous = n_action == 0;
  double margin_b = vacuous ? half_k : (min_dest - half_k + region_tol);

  // (c) semiconcavity: curvature of M-hat u within the continuation-region
  // curvature of u (both by second central differences along axes).  Stencil
  // spacing is 2h: the discrete argmin of M-hat carries a period-2h
  // interpolation oscillation (up to h^2/4 per node) plus isolated 2h^2
  // spikes where xi = 0 is excluded, and an h stencil turns those into O(1)
  // curvature noise at any resolution.  At 2h the parity pattern cancels.
  double kappa_u = -std::numeric_limits<double>::infinity();
  double kappa_mu = -std::numeric_limits<double>::infinity();
  std::vector<size_t> strides(n, 1);
  {
    // row-major, last axis fastest
    for (int a = n - 2; a >= 0; --a)
      strides[a] = strides[a + 1] * grid.space[a + 1].count;
  }
  for (int k = 0; k < K; ++k) {
    for (size_t i = 0; i < N; ++i) {
      auto mi = grid.multi_index(i);
      bool interior = true;
      for (int a = 0; a < n; ++a)
        interior = interior && mi[a] > 1 && mi[a] < grid.space[a].count - 2;
      if (!interior) continue;
      for (int a = 0; a < n; ++a) {
        double w = 2.0 * grid.space[a].h();
        size_t off = 2 * strides[a];
        double d2m =
            (sol.mu[k][i + off] - 2.0 * sol.mu[k][i] + sol.mu[k][i - off]) / (w * w);
        kappa_mu = std::max(kappa_mu, d2m);
        bool continuation = sol.action.empty() || !sol.action[k][i];
        if (continuation) {
          double d2u =
              (sol.u[k][i + off] - 2.0 * sol.u[k][i] + sol.u[k][i - off]) / (w * w);
          kappa_u = std::max(kappa_u, d2u);
        }
      }
    }
  }
  if (!std::isfinite(kappa_u)) kappa_u = 0.0;    // grid too small to sample
  if (!std::isfinite(kappa_mu)) kappa_mu = 0.0;
  double tol_c = 0.01 * std::max(1.0, std::abs(kappa_u));
  double margin_c = (kappa_u + tol_c) - kappa_mu;

  CheckReport rep;
  rep.id = "obstacle";
  bool pass = margin_a >= 0.0 && margin_b >= 0.0 && margin_c >= 0.0;
  rep.status = pass ? "pass" : "fail";
  rep.margin = std::min({margin_a, margin_b, margin_c});
  rep.tolerances = {{"tol_pointwise", tol_a},
                    {"tol_destination", region_tol},
                    {"tol_curvature", tol_c},
                    {"half_K", half_k}};
  rep.witnesses = {{"pointwise", {{"slice", wa_k}, {"node", wa_i}}},
                   {"destination",
                    vacuous ? ordered_json{{"vacuous", true}}
                            : ordered_json{{"slice", wb_k}, {"node", wb_i}}}};
  rep.details = {{"min_gap", min_gap},
                 {"min_destination_gap", vacuous ? 0.0 : min_dest},
                 {"action_nodes", n_action},
                 {"kappa_u", kappa_u},
                 {"kappa_mu", kappa_mu},
                 {"margins", {{"pointwise", margin_a},
                              {"destination", margin_b},
                              {"curvature", margin_c}}},
                 {"scale", scale}};
  return rep;
}

namespace {

/// Radial quadrature of w(s) rho(s) over [a, b] with 32 panels x 8 nodes.
template <typename Fn>
double radial_quad(const CoefficientFn& density, double a, double b, Fn&& w) {
  if (b <= a) return 0.0;
  const int panels = 32;
  double total = 0.0;
  double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * width;
    for (int q = 0; q < 8; ++q) {
      double s = lo + kGlX[q] * width;
      EvalPoint ep;
      ep.s = s;
      total += kGlW[q] * width * w(s) * density.eval(ep);
    }
  }
  return total;
}

}  // namespace

CheckReport check_viscosity_probe(Solution& sol, const ProblemSpec& spec,
                                  double theta, int n_probes, uint64_t seed,
                                  double tol_visc, double max_violation_frac) {
  ensure_mu(sol, spec);
  const Grid& grid = sol.grid;
  const int n = grid.dim(), K = grid.time_count;
  const double ds = grid.dt();

  const int half = n <= 2 ? 2 : 1;  // 5 or 3 points per axis
  bool feasible = K >= 3;
  for (int a = 0; a < n; ++a)
    feasible = feasible && grid.space[a].count >= 2 * half + 1;

  CheckReport rep;
  rep.id = "viscosity";
  if (!feasible) {
    rep.status = "inconclusive";
    rep.margin = 0.0;
    rep.details = {{"reason", "grid too small for probe neighborhoods"}};
    return rep;
  }

  // quadratic space-time basis: 1, dx_a, dx_a dx_c (a<=c), ds, ds^2, dx_a ds
  const int n2 = n * (n + 1) / 2;
  const int cols = 1 + n + n2 + 2 + n;
  const int block = 2 * half + 1;
  int rows = 3;
  for (int a = 0; a < n; ++a) rows *= block;

  RngStream rs(seed, RngStream::kChecks, 3);
  std::vector<size_t> strides(n, 1);
  for (int a = n - 2; a >= 0; --a)
    strides[a] = strides[a + 1] * grid.space[a + 1].count;

  long violations = 0, skipped = 0, valid = 0;
  double worst = 0.0;
  ordered_json worst_witness;

  std::vector<double> x(n), xc(n), dest(n);
  Eigen::MatrixXd Amat(rows, cols);
  Eigen::VectorXd rhs(rows);

  const bool has_small = spec.jumps.small_density.has_value();
  const SmallDensity* sd = has_small ? &*spec.jumps.small_density : nullptr;
  double theta_eff = theta;
  if (has_small) theta_eff = std::min(theta, sd->radius_cut);

  for (int probe = 0; probe < n_probes; ++probe) {
    int k = 1 + rs.uniform_index(K - 2);
    std::vector<int> mi(n);
    for (int a = 0; a < n; ++a)
      mi[a] = half + rs.uniform_index(grid.space[a].count - 2 * half);
    size_t flat = grid.flat_index(mi);
    grid.node_point(flat, x.data());
    double t_orig = grid.horizon - grid.slice_time(k);
    double u0 = sol.u[k][flat];

    // assemble the least-squares system over the space-time block
    int row = 0;
    double umin = u0, umax = u0;
    std::vector<int> off(n, -half);
    for (int dk = -1; dk <= 1; ++dk) {
      std::fill(off.begin(), off.end(), -half);
      bool done = false;
      while (!done) {
        size_t nb = flat;
        for (int a = 0; a < n; ++a)
          nb += static_cast<size_t>(off[a]) * strides[a];
        double uv = sol.u[k + dk][nb];
        umin = std::min(umin, uv);
        umax = std::max(umax, uv);
        double dss = dk * ds;
        int c = 0;
        Amat(row, c++) = 1.0;
        for (int a = 0; a < n; ++a) Amat(row, c++) = off[a] * grid.space[a].h();
        for (int a = 0; a < n; ++a)
          for (int b2 = a; b2 < n; ++b2)
            Amat(row, c++) =
                off[a] * grid.space[a].h() * off[b2] * grid.space[b2].h();
        Amat(row, c++) = dss;
        Amat(row, c++) = dss * dss;
        for (int a = 0; a < n; ++a) Amat(row, c++) = off[a] * grid.space[a].h() * dss;
        rhs(row) = uv;
        ++row;
        // odometer over the spatial offsets
        int a = n - 1;
        while (a >= 0) {
          if (++off[a] <= half) break;
          off[a] = -half;
          --a;
        }
        done = a < 0;
      }
    }

    Eigen::VectorXd coef = Amat.colPivHouseholderQr().solve(rhs);
    double fitres = (Amat * coef - rhs).cwiseAbs().maxCoeff();
    double variation = umax - umin;
    bool genuine = variation > 0.0 ? fitres < 0.1 * variation
                                   : fitres <= 1e-12 * std::max(1.0, std::abs(u0));
    if (!genuine) {
      ++skipped;
      continue;
    }
    ++valid;

    // unpack the local quadratic at the center
    int c = 1;
    std::vector<double> gradp(n);
    for (int a = 0; a < n; ++a) gradp[a] = coef(c++);
    std::vector<double> H(static_cast<size_t>(n) * n, 0.0);
    for (int a = 0; a < n; ++a)
      for (int b2 = a; b2 < n; ++b2) {
        double v = coef(c++);
        if (a == b2)
          H[a * n + a] = 2.0 * v;
        else {
          H[a * n + b2] = v;
          H[b2 * n + a] = v;
        }
      }
    double phi_s = coef(c++);

    CoeffBundle cb = eval_coeffs(spec, x.data(), t_orig);
    double lphi = spec.discount * u0;
    for (int a = 0; a < n; ++a) {
      lphi -= cb.b[a] * gradp[a];
      for (int b2 = 0; b2 < n; ++b2) lphi -= cb.A[a * n + b2] * H[a * n + b2];
    }

    // I1: quadratic-exact part below theta (always compensated there)
    double i1 = 0.0;
    for (const auto& atom : cb.atoms) {
      double nz = euclid(atom.z.data(), n);
      if (nz < theta_eff) {
        double q = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b2 = 0; b2 < n; ++b2)
            q += atom.z[a] * H[a * n + b2] * atom.z[b2];
        i1 += atom.lambda * 0.5 * q;
      }
    }
    if (has_small) {
      for (size_t d = 0; d < sd->directions.size(); ++d) {
        double q = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b2 = 0; b2 < n; ++b2)
            q += sd->directions[d][a] * H[a * n + b2] * sd->directions[d][b2];
        i1 += sd->weights[d] * 0.5 * q *
              radial_quad(sd->density, 0.0, std::min(theta_eff, sd->radius_cut),
                          [](double s) { return s * s; });
      }
    }

    // I2: interpolated u beyond theta, compensation with the fit's gradient
    double i2 = 0.0;
    for (const auto& atom : cb.atoms) {
      double nz = euclid(atom.z.data(), n);
      if (nz >= theta_eff) {
        for (int a = 0; a < n; ++a) dest[a] = x[a] + atom.z[a];
        double term = extended_value(sol.u[k], spec, dest.data()) - u0;
        if (nz < 1.0)
          for (int a = 0; a < n; ++a) term -= gradp[a] * atom.z[a];
        i2 += atom.lambda * term;
      }
    }
    if (has_small && sd->radius_cut > theta_eff) {
      for (size_t d = 0; d < sd->directions.size(); ++d) {
        double gd = 0.0;
        for (int a = 0; a < n; ++a) gd += gradp[a] * sd->directions[d][a];
        i2 += sd->weights[d] *
              radial_quad(sd->density, theta_eff, sd->radius_cut, [&](double s) {
                for (int a = 0; a < n; ++a) dest[a] = x[a] + s * sd->directions[d][a];
                return extended_value(sol.u[k], spec, dest.data()) - u0 - s * gd;
              });
      }
    }

    double d1 = phi_s + lphi - cb.f - i1 - i2;
    double d2 = u0 - sol.mu[k][flat];
    double res = std::max(d1, d2);
    if (std::abs(res) > tol_visc) {
      ++violations;
      if (std::abs(res) > std::abs(worst)) {
        worst = res;
        worst_witness = {{"slice", k}, {"node", flat}, {"x", x},
                         {"t", t_orig}, {"d1", d1},    {"d2", d2}};
      }
    } else if (std::abs(res) > std::abs(worst) && violations == 0) {
      worst = res;
    }
  }

  double rate = valid > 0 ? static_cast<double>(violations) / valid : 0.0;
  rep.status = valid == 0 ? "inconclusive"
                          : (rate <= max_violation_frac ? "pass" : "fail");
  rep.margin = max_violation_frac - rate;
  rep.tolerances = {{"tol_visc", tol_visc},
                    {"max_violation_frac", max_violation_frac},
                    {"theta", theta_eff}};
  rep.witnesses = worst_witness;
  rep.details = {{"n_probes", n_probes}, {"valid", valid},
                 {"skipped", skipped},   {"violations", violations},
                 {"violation_rate", rate}, {"worst_residual", worst}};
  return rep;
}

}  // namespace qvi
