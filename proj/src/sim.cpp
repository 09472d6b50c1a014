#include "qvi/sim.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "qvi/errors.hpp"
#include "qvi/rng.hpp"

namespace qvi {

namespace {

using ordered_json = nlohmann::ordered_json;

double opt_number(const ordered_json& j, const std::string& key, double dflt) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_number())
    throw ConfigError("mc config: \"" + key + "\" must be a number");
  return it->get<double>();
}

long opt_long(const ordered_json& j, const std::string& key, long dflt) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_number_integer())
    throw ConfigError("mc config: \"" + key + "\" must be an integer");
  return it->get<long>();
}

bool opt_bool(const ordered_json& j, const std::string& key, bool dflt) {
  auto it = j.find(key);
  if (it == j.end()) return dflt;
  if (!it->is_boolean())
    throw ConfigError("mc config: \"" + key + "\" must be a boolean");
  return it->get<bool>();
}

/// Inverse-CDF sampler for the simulated band [theta, radius_cut] of the
/// small-jump measure, plus the compensator drift for exactly that band.
/// Jumps below theta are dropped together with their compensator, so the
/// truncation bias is O(first moment below theta); both dropped integrals
/// are reported in the estimate.
struct SmallSampler {
  bool active = false;
  double theta = 0.0, cut = 0.0;
  double intensity = 0.0;              // total simulated rate
  std::vector<double> s_grid, cdf;     // cdf.back() == intensity
  std::vector<double> dir_cum;         // cumulative direction weights
  const SmallDensity* sd = nullptr;
  std::vector<double> comp;            // sum_d w_d dir_d int s rho ds (band)
  double dropped_intensity = 0.0;      // below-theta mass (midpoint estimate)
  double dropped_first_moment = 0.0;

  void build(const ProblemSpec& spec, double cut_frac) {
    if (!spec.jumps.small_density.has_value()) return;
    active = true;
    sd = &*spec.jumps.small_density;
    cut = sd->radius_cut;
    cut_frac = std::min(std::max(cut_frac, 1e-6), 0.9);
    theta = cut_frac * cut;

    const int M = 4096;
    s_grid.resize(M + 1);
    cdf.resize(M + 1);
    std::vector<double> rho(M + 1);
    const double ds = (cut - theta) / M;
    for (int i = 0; i <= M; ++i) {
      s_grid[i] = theta + i * ds;
      EvalPoint p;
      p.s = s_grid[i];
      rho[i] = sd->density.eval(p);
      if (!(rho[i] >= 0.0))
        throw ConfigError("small-jump density must be nonnegative on the band");
    }
    cdf[0] = 0.0;
    double fm = 0.0;  // first moment over the simulated band
    for (int i = 1; i <= M; ++i) {
      cdf[i] = cdf[i - 1] + 0.5 * (rho[i - 1] + rho[i]) * ds;
      fm += 0.5 * (s_grid[i - 1] * rho[i - 1] + s_grid[i] * rho[i]) * ds;
    }
    intensity = cdf.back();

    const int nd = static_cast<int>(sd->directions.size());
    dir_cum.resize(nd);
    double wsum = 0.0;
    for (int d = 0; d < nd; ++d) {
      wsum += sd->weights[d];
      dir_cum[d] = wsum;
    }
    for (double& c : dir_cum) c /= wsum;

    comp.assign(spec.dim, 0.0);
    for (int d = 0; d < nd; ++d)
      for (int a = 0; a < spec.dim; ++a)
        comp[a] += sd->weights[d] / wsum * sd->directions[d][a] * fm;

    // Below-theta diagnostics by midpoint rule; for infinite-activity
    // densities the intensity figure is a truncation-dependent lower bound,
    // the first moment is the bias-relevant quantity.
    const int M2 = 4096;
    const double ds2 = theta / M2;
    for (int i = 0; i < M2; ++i) {
      EvalPoint p;
      p.s = (i + 0.5) * ds2;
      double r = sd->density.eval(p);
      dropped_intensity += r * ds2;
      dropped_first_moment += p.s * r * ds2;
    }
  }

  double sample_radius(double u01) const {
    double target = u01 * intensity;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    size_t i = std::min<size_t>(std::max<ptrdiff_t>(it - cdf.begin(), 1),
                                cdf.size() - 1);
    double lo = cdf[i - 1], hi = cdf[i];
    double frac = hi > lo ? (target - lo) / (hi - lo) : 0.5;
    return s_grid[i - 1] + frac * (s_grid[i] - s_grid[i - 1]);
  }

  const std::vector<double>& sample_direction(double u01) const {
    auto it = std::lower_bound(dir_cum.begin(), dir_cum.end(), u01);
    size_t d = std::min<size_t>(it - dir_cum.begin(), dir_cum.size() - 1);
    return sd->directions[d];
  }
};

/// Per-run constant-coefficient cache; expression evaluation stays out of
/// the inner loop when a slot does not depend on (x, t).
struct CoeffCache {
  bool b_const = false, sig_const = false;
  std::vector<double> b0, sig0;
  struct AtomC {
    bool lam_const = false, z_const = false;
    double lam0 = 0.0;
    std::vector<double> z0;
  };
  std::vector<AtomC> atoms;

  explicit CoeffCache(const ProblemSpec& spec) {
    const int n = spec.dim, m = spec.sigma_cols();
    b_const = true;
    for (const auto& c : spec.drift.comp) b_const = b_const && c.is_constant();
    sig_const = true;
    for (const auto& c : spec.diffusion.comp)
      sig_const = sig_const && c.is_constant();
    std::vector<double> origin(n, 0.0);
    EvalPoint p;
    p.x = origin.data();
    if (b_const) {
      b0.resize(n);
      spec.eval_b(origin.data(), 0.0, b0.data());
    }
    if (sig_const) {
      sig0.resize(static_cast<size_t>(n) * m);
      spec.eval_sigma(origin.data(), 0.0, sig0.data());
    }
    for (const auto& atom : spec.jumps.atoms) {
      AtomC ac;
      ac.lam_const = atom.intensity.is_constant();
      ac.z_const = true;
      for (const auto& c : atom.size.comp) ac.z_const = ac.z_const && c.is_constant();
      if (ac.lam_const) ac.lam0 = atom.intensity.eval(p);
      if (ac.z_const) {
        ac.z0.resize(n);
        atom.size.eval(p, ac.z0.data());
      }
      atoms.push_back(std::move(ac));
    }
  }
};

bool outside_box(const double* x, const StopRule& stop, int n) {
  for (int a = 0; a < n; ++a)
    if (x[a] < stop.lo[a] || x[a] > stop.hi[a]) return true;
  return false;
}

PathRecord run_path(const ProblemSpec& spec, const Strategy& strategy,
                    const double* x0, double t0, const PathConfig& cfg,
                    double dt, long path_index, const StopRule& stop,
                    const SmallSampler& small, const CoeffCache& cache) {
  const int n = spec.dim, m = spec.sigma_cols();
  const double T = spec.horizon, r = spec.discount;
  const double teps = 1e-12;

  const uint64_t stream_id =
      cfg.antithetic ? static_cast<uint64_t>(path_index / 2)
                     : static_cast<uint64_t>(path_index);
  const double zsign = (cfg.antithetic && (path_index & 1)) ? -1.0 : 1.0;
  RngStream rng(cfg.seed, RngStream::kPaths, stream_id);

  PathRecord rec;
  std::vector<double> X(x0, x0 + n);
  double t = t0;

  auto record_state = [&](uint8_t flag) {
    if (!cfg.record_states) return;
    rec.times.push_back(t);
    rec.states.push_back(X);
    rec.state_flags.push_back(flag);
  };

  // Stop rules that already hold at t0 short-circuit without costs.
  if (stop.kind == StopRule::Kind::FixedTime && stop.s <= t0 + teps) {
    rec.stopped_early = true;
    rec.stop_time = std::max(stop.s, t0);
    rec.stop_state = X;
    return rec;
  }
  if (stop.kind == StopRule::Kind::FirstExit && outside_box(X.data(), stop, n)) {
    rec.stopped_early = true;
    rec.stop_time = t0;
    rec.stop_state = X;
    return rec;
  }
  record_state(0);

  std::vector<double> xi(n);
  auto query = [&](void) {
    if (strategy.kind() == Strategy::Kind::NoAction) return;
    while (!rec.flagged_budget &&
           strategy.decide(X.data(), t, n, rec.impulses.size(), xi.data())) {
      if (static_cast<long>(rec.impulses.size()) >= cfg.max_impulses_per_path) {
        rec.flagged_budget = true;
        break;
      }
      double disc = (r == 0.0) ? 1.0 : std::exp(-r * (t - t0));
      double c = disc * spec.eval_B(xi.data(), t);
      for (int a = 0; a < n; ++a) X[a] += xi[a];
      rec.impulses.push_back({t, xi, c});
      rec.intervention_cost += c;
      record_state(1);
    }
  };
  query();

  std::vector<double> bv(n), sg(static_cast<size_t>(n) * m), Z(m), drift(n);
  std::vector<double> lam(spec.jumps.atoms.size());
  std::vector<std::vector<double>> zv(spec.jumps.atoms.size(),
                                      std::vector<double>(n));

  while (t < T - teps) {
    double step = std::min(dt, T - t);
    if (stop.kind == StopRule::Kind::FixedTime) step = std::min(step, stop.s - t);
    if (step <= 0.0) break;

    double disc = (r == 0.0) ? 1.0 : std::exp(-r * (t - t0));
    rec.running_cost += disc * spec.eval_f(X.data(), t) * step;

    if (cache.b_const)
      std::copy(cache.b0.begin(), cache.b0.end(), bv.begin());
    else
      spec.eval_b(X.data(), t, bv.data());
    if (cache.sig_const)
      std::copy(cache.sig0.begin(), cache.sig0.end(), sg.begin());
    else
      spec.eval_sigma(X.data(), t, sg.data());

    for (int a = 0; a < n; ++a) drift[a] = bv[a];
    for (size_t k = 0; k < spec.jumps.atoms.size(); ++k) {
      const auto& atom = spec.jumps.atoms[k];
      const auto& ac = cache.atoms[k];
      EvalPoint p;
      p.x = X.data();
      p.t = t;
      lam[k] = ac.lam_const ? ac.lam0 : atom.intensity.eval(p);
      if (ac.z_const)
        zv[k] = ac.z0;
      else
        atom.size.eval(p, zv[k].data());
      double norm2 = 0.0;
      for (int a = 0; a < n; ++a) norm2 += zv[k][a] * zv[k][a];
      if (std::sqrt(norm2) < 1.0)
        for (int a = 0; a < n; ++a) drift[a] -= lam[k] * zv[k][a];
    }
    if (small.active)
      for (int a = 0; a < n; ++a) drift[a] -= small.comp[a];

    // Fixed draw order: m normals, one Poisson per atom, then the
    // small-jump count and two uniforms per small jump.
    for (int j = 0; j < m; ++j) Z[j] = zsign * rng.normal();
    const double sdt = std::sqrt(step);
    for (int a = 0; a < n; ++a) {
      double dx = drift[a] * step;
      for (int j = 0; j < m; ++j) dx += sg[static_cast<size_t>(a) * m + j] * Z[j] * sdt;
      X[a] += dx;
    }
    for (size_t k = 0; k < spec.jumps.atoms.size(); ++k) {
      int cnt = rng.poisson(lam[k] * step);
      for (int a = 0; a < n; ++a) X[a] += cnt * zv[k][a];
    }
    if (small.active) {
      int cnt = rng.poisson(small.intensity * step);
      for (int jj = 0; jj < cnt; ++jj) {
        double s = small.sample_radius(rng.uniform());
        const auto& dir = small.sample_direction(rng.uniform());
        for (int a = 0; a < n; ++a) X[a] += s * dir[a];
      }
    }
    t += step;
    record_state(0);

    bool blown = false;
    for (int a = 0; a < n; ++a)
      if (!std::isfinite(X[a]) || std::abs(X[a]) > cfg.overflow_guard) blown = true;
    if (blown) {
      rec.flagged_overflow = true;
      break;
    }

    if (stop.kind == StopRule::Kind::FixedTime && t >= stop.s - teps) {
      rec.stopped_early = true;
      rec.stop_time = stop.s;
      rec.stop_state = X;
      break;
    }
    if (stop.kind == StopRule::Kind::FirstExit && outside_box(X.data(), stop, n)) {
      rec.stopped_early = true;
      rec.stop_time = t;
      rec.stop_state = X;
      break;
    }
    if (t < T - teps) query();
  }

  if (!rec.stopped_early) {
    rec.stop_time = std::min(t, T);
    rec.stop_state = X;
    if (!rec.flagged_overflow) {
      double disc = (r == 0.0) ? 1.0 : std::exp(-r * (T - t0));
      rec.terminal_cost = disc * spec.eval_g(X.data());
    }
  }
  return rec;
}

struct LevelStats {
  double mean = 0.0, std_error = 0.0;
  long flagged_overflow = 0, flagged_budget = 0, flagged_any = 0;
};

LevelStats run_level(const ProblemSpec& spec, const Strategy& strategy,
                     const std::vector<double>& x0, double t0,
                     const PathConfig& cfg, double dt,
                     const SmallSampler& small, const CoeffCache& cache) {
  const long n = cfg.n_paths;
  std::vector<double> totals(n, 0.0);
  std::vector<uint8_t> fov(n, 0), fbv(n, 0);

  auto worker = [&](long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      PathRecord rec = run_path(spec, strategy, x0.data(), t0, cfg, dt, i,
                                StopRule::none(), small, cache);
      totals[i] = rec.total();
      fov[i] = rec.flagged_overflow ? 1 : 0;
      fbv[i] = rec.flagged_budget ? 1 : 0;
    }
  };

  int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    worker(0, n);
  } else {
    std::vector<std::thread> pool;
    long chunk = (n + jobs - 1) / jobs;
    for (int w = 0; w < jobs; ++w) {
      long lo = w * chunk, hi = std::min<long>(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  LevelStats st;
  for (long i = 0; i < n; ++i) {
    st.flagged_overflow += fov[i];
    st.flagged_budget += fbv[i];
    st.flagged_any += (fov[i] || fbv[i]) ? 1 : 0;
  }

  // Antithetic pairs are dependent, so the pair means are the iid units.
  if (cfg.antithetic) {
    long np = n / 2;
    double mean = 0.0;
    for (long i = 0; i < np; ++i) mean += 0.5 * (totals[2 * i] + totals[2 * i + 1]);
    mean /= np;
    double var = 0.0;
    for (long i = 0; i < np; ++i) {
      double d = 0.5 * (totals[2 * i] + totals[2 * i + 1]) - mean;
      var += d * d;
    }
    var = np > 1 ? var / (np - 1) : 0.0;
    st.mean = mean;
    st.std_error = std::sqrt(var / np);
  } else {
    double mean = 0.0;
    for (long i = 0; i < n; ++i) mean += totals[i];
    mean /= n;
    double var = 0.0;
    for (long i = 0; i < n; ++i) {
      double d = totals[i] - mean;
      var += d * d;
    }
    var = n > 1 ? var / (n - 1) : 0.0;
    st.mean = mean;
    st.std_error = std::sqrt(var / n);
  }
  return st;
}

}  // namespace

PathConfig PathConfig::parse(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mc config: invalid JSON: ") + e.what());
  }
  return from_json(j);
}

PathConfig PathConfig::from_json(const ordered_json& j) {
  if (!j.is_object()) throw ConfigError("mc config must be a JSON object");
  static const char* known[] = {"dt",           "n_paths",
                                "seed",         "max_impulses_per_path",
                                "overflow_guard", "sim_cut_frac",
                                "antithetic",   "richardson",
                                "record_states", "jobs"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("mc config: unknown key \"" + it.key() + "\"");
  }
  PathConfig cfg;
  cfg.dt = opt_number(j, "dt", cfg.dt);
  cfg.n_paths = opt_long(j, "n_paths", cfg.n_paths);
  long seed = opt_long(j, "seed", 0);
  if (seed < 0) throw ConfigError("mc config: \"seed\" must be nonnegative");
  cfg.seed = static_cast<uint64_t>(seed);
  cfg.max_impulses_per_path =
      static_cast<int>(opt_long(j, "max_impulses_per_path", cfg.max_impulses_per_path));
  cfg.overflow_guard = opt_number(j, "overflow_guard", cfg.overflow_guard);
  cfg.sim_cut_frac = opt_number(j, "sim_cut_frac", cfg.sim_cut_frac);
  cfg.antithetic = opt_bool(j, "antithetic", cfg.antithetic);
  cfg.richardson = opt_bool(j, "richardson", cfg.richardson);
  cfg.record_states = opt_bool(j, "record_states", cfg.record_states);
  cfg.jobs = static_cast<int>(opt_long(j, "jobs", cfg.jobs));

  if (!(cfg.dt > 0.0)) throw ValidationError("mc config: dt must be positive");
  if (cfg.n_paths < 1) throw ValidationError("mc config: n_paths must be >= 1");
  if (cfg.antithetic && (cfg.n_paths % 2) != 0)
    throw ValidationError("mc config: antithetic needs an even n_paths");
  if (cfg.max_impulses_per_path < 1)
    throw ValidationError("mc config: max_impulses_per_path must be >= 1");
  if (!(cfg.overflow_guard > 0.0))
    throw ValidationError("mc config: overflow_guard must be positive");
  if (!(cfg.sim_cut_frac > 0.0) || cfg.sim_cut_frac >= 1.0)
    throw ValidationError("mc config: sim_cut_frac must lie in (0, 1)");
  if (cfg.jobs < 1) throw ValidationError("mc config: jobs must be >= 1");
  return cfg;
}

nlohmann::ordered_json PathConfig::render() const {
  ordered_json j;
  j["dt"] = dt;
  j["n_paths"] = n_paths;
  j["seed"] = seed;
  j["max_impulses_per_path"] = max_impulses_per_path;
  j["overflow_guard"] = overflow_guard;
  j["sim_cut_frac"] = sim_cut_frac;
  j["antithetic"] = antithetic;
  j["richardson"] = richardson;
  j["record_states"] = record_states;
  j["jobs"] = jobs;
  return j;
}

Strategy Strategy::no_action() { return Strategy(); }

Strategy Strategy::feedback(const Solution& sol) {
  Strategy s;
  s.kind_ = Kind::Feedback;
  s.sol_ = &sol;
  return s;
}

Strategy Strategy::fixed_schedule(
    std::vector<std::pair<double, std::vector<double>>> events) {
  std::sort(events.begin(), events.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Strategy s;
  s.kind_ = Kind::FixedSchedule;
  s.events_ = std::move(events);
  return s;
}

Strategy Strategy::threshold(const std::string& trigger,
                             const std::vector<std::string>& impulse, int dim) {
  if (static_cast<int>(impulse.size()) != dim)
    throw ConfigError("threshold strategy: impulse needs one expression per axis");
  SymbolSet allowed;
  allowed.dim = dim;
  allowed.x = true;
  allowed.t = true;
  Strategy s;
  s.kind_ = Kind::Threshold;
  s.trigger_ = Expr::compile(trigger, allowed);
  for (const auto& src : impulse) s.impulse_.push_back(Expr::compile(src, allowed));
  return s;
}

bool Strategy::decide(const double* x, double t, int dim,
                      std::size_t fired_events, double* xi) const {
  switch (kind_) {
    case Kind::NoAction:
      return false;
    case Kind::Feedback: {
      const Solution& S = *sol_;
      double s = S.grid.horizon - t;
      if (s < -1e-12) return false;
      int k = static_cast<int>(std::lround(s / S.grid.dt()));
      k = std::min(std::max(k, 0), S.grid.time_count - 1);
      size_t flat = S.grid.flat_index(S.grid.nearest_node(x));
      if (!S.action[k][flat]) return false;
      if (!S.impulse[k].has(flat)) return false;
      const double* v = S.impulse[k].get(flat);
      double norm2 = 0.0;
      for (int a = 0; a < dim; ++a) norm2 += v[a] * v[a];
      if (norm2 == 0.0) return false;
      std::copy(v, v + dim, xi);
      return true;
    }
    case Kind::FixedSchedule: {
      if (fired_events >= events_.size()) return false;
      const auto& ev = events_[fired_events];
      if (t < ev.first - 1e-12) return false;
      std::copy(ev.second.begin(), ev.second.end(), xi);
      return true;
    }
    case Kind::Threshold: {
      EvalPoint p;
      p.x = x;
      p.t = t;
      if (!(trigger_.eval(p) > 0.0)) return false;
      double norm2 = 0.0;
      for (int a = 0; a < dim; ++a) {
        xi[a] = impulse_[a].eval(p);
        norm2 += xi[a] * xi[a];
      }
      return norm2 > 0.0;
    }
  }
  return false;
}

StopRule StopRule::fixed_time(double s) {
  StopRule r;
  r.kind = Kind::FixedTime;
  r.s = s;
  return r;
}

StopRule StopRule::first_exit(std::vector<double> lo, std::vector<double> hi) {
  StopRule r;
  r.kind = Kind::FirstExit;
  r.lo = std::move(lo);
  r.hi = std::move(hi);
  return r;
}

PathRecord simulate_path(const ProblemSpec& spec, const Strategy& strategy,
                         const std::vector<double>& x0, double t0,
                         const PathConfig& cfg, long path_index,
                         const StopRule& stop) {
  if (static_cast<int>(x0.size()) != spec.dim)
    throw ValidationError("simulate: x0 dimension mismatch");
  SmallSampler small;
  small.build(spec, cfg.sim_cut_frac);
  CoeffCache cache(spec);
  return run_path(spec, strategy, x0.data(), t0, cfg, cfg.dt, path_index, stop,
                  small, cache);
}

CostEstimate estimate_cost(const ProblemSpec& spec, const Strategy& strategy,
                           const std::vector<double>& x0, double t0,
                           const PathConfig& cfg) {
  if (static_cast<int>(x0.size()) != spec.dim)
    throw ValidationError("simulate: x0 dimension mismatch");
  if (t0 < 0.0 || t0 > spec.horizon + 1e-12)
    throw ValidationError("simulate: t0 outside [0, horizon]");
  if (cfg.antithetic && cfg.n_paths % 2 != 0)
    throw ValidationError("simulate: antithetic pairing needs an even n_paths");

  SmallSampler small;
  small.build(spec, cfg.sim_cut_frac);
  CoeffCache cache(spec);

  std::vector<double> dts = {cfg.dt};
  if (cfg.richardson) {
    dts.push_back(cfg.dt / 2.0);
    dts.push_back(cfg.dt / 4.0);
  }

  CostEstimate est;
  est.n_paths = cfg.n_paths;
  est.dt = cfg.dt;
  est.dropped_intensity = small.dropped_intensity;
  est.dropped_first_moment = small.dropped_first_moment;

  std::vector<double> means;
  for (size_t li = 0; li < dts.size(); ++li) {
    LevelStats st = run_level(spec, strategy, x0, t0, cfg, dts[li], small, cache);
    means.push_back(st.mean);
    est.levels.emplace_back(dts[li], st.mean);
    if (li == 0) {
      est.mean = st.mean;
      est.std_error = st.std_error;
      est.ci95 = 1.959963984540054 * st.std_error;
      est.flagged_overflow = st.flagged_overflow;
      est.flagged_budget = st.flagged_budget;
      est.unreliable = st.flagged_any > 0.01 * cfg.n_paths;
    }
  }
  if (cfg.richardson && means.size() == 3) {
    // Weak order one: J(dt) = J + c dt, extrapolate from the finest two.
    est.extrapolated = 2.0 * means[2] - means[1];
    double d01 = means[0] - means[1], d12 = means[1] - means[2];
    est.observed_order = (d12 != 0.0 && d01 / d12 > 0.0) ? std::log2(d01 / d12) : 0.0;
  }
  return est;
}

nlohmann::ordered_json CostEstimate::to_json() const {
  ordered_json j;
  j["mean"] = mean;
  j["std_error"] = std_error;
  j["ci95"] = ci95;
  j["n_paths"] = n_paths;
  j["dt"] = dt;
  j["flagged_overflow"] = flagged_overflow;
  j["flagged_budget"] = flagged_budget;
  j["unreliable"] = unreliable;
  j["dropped_small_jump_intensity"] = dropped_intensity;
  j["dropped_small_jump_first_moment"] = dropped_first_moment;
  if (!levels.empty() && levels.size() > 1) {
    ordered_json arr = ordered_json::array();
    for (const auto& [d, mn] : levels) {
      ordered_json e;
      e["dt"] = d;
      e["mean"] = mn;
      arr.push_back(e);
    }
    j["richardson"] = ordered_json{{"levels", arr},
                                   {"extrapolated", extrapolated},
                                   {"observed_order", observed_order}};
  }
  return j;
}

double solution_value(const Solution& sol, const std::vector<double>& x0,
                      double t0) {
  const Grid& g = sol.grid;
  double s = g.horizon - t0;
  int k = static_cast<int>(std::lround(s / g.dt()));
  k = std::min(std::max(k, 0), g.time_count - 1);
  std::vector<double> xc(g.dim());
  g.clamp(x0.data(), xc.data());
  return sol.u[k].interpolate(xc.data());
}

GapReport evaluate_policy_gap(const ProblemSpec& spec, const Solution& sol,
                              const std::vector<double>& x0, double t0,
                              const PathConfig& cfg) {
  Strategy strat = Strategy::feedback(sol);
  GapReport rep;
  rep.estimate = estimate_cost(spec, strat, x0, t0, cfg);
  rep.j_hat = rep.estimate.mean;
  rep.ci95 = rep.estimate.ci95;
  rep.u_solver = solution_value(sol, x0, t0);
  rep.gap = rep.j_hat - rep.u_solver;
  return rep;
}

nlohmann::ordered_json GapReport::to_json() const {
  ordered_json j;
  j["j_hat"] = j_hat;
  j["ci95"] = ci95;
  j["u_solver"] = u_solver;
  j["gap"] = gap;
  j["estimate"] = estimate.to_json();
  return j;
}

}  // namespace qvi
