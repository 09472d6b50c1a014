#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qvi/expr.hpp"
#include "qvi/problem.hpp"
#include "qvi/solver.hpp"

namespace qvi {

struct PathConfig {
  double dt = 1e-3;
  long n_paths = 10000;
  uint64_t seed = 0;
  int max_impulses_per_path = 1000;
  double overflow_guard = 1e8;
  double sim_cut_frac = 0.1;   // simulate small jumps with radius >= frac * cut
  bool antithetic = false;
  bool richardson = false;     // dt refinement study (dt, dt/2, dt/4)
  bool record_states = false;
  int jobs = 1;

  static PathConfig parse(const std::string& text);
  static PathConfig from_json(const nlohmann::ordered_json& j);
  nlohmann::ordered_json render() const;
};

/// Impulse strategies.  All are nonanticipative: the decision at a query
/// point depends on (x, t) only.
class Strategy {
 public:
  enum class Kind { NoAction, Feedback, FixedSchedule, Threshold };

  static Strategy no_action();
  /// Nearest-node policy lookup in a solved value function.  The Solution
  /// must outlive the strategy.
  static Strategy feedback(const Solution& sol);
  static Strategy fixed_schedule(
      std::vector<std::pair<double, std::vector<double>>> events);
  /// trigger > 0 fires; impulse components are expressions in x, t.
  static Strategy threshold(const std::string& trigger,
                            const std::vector<std::string>& impulse, int dim);

  /// If an impulse applies at (x, t), writes it to xi and returns true.
  /// `fired` counts impulses already applied on this path (FixedSchedule
  /// consumes its events in order).
  bool decide(const double* x, double t, int dim, std::size_t fired_events,
              double* xi) const;

  Kind kind() const { return kind_; }
  const Solution* solution() const { return sol_; }

 private:
  Kind kind_ = Kind::NoAction;
  const Solution* sol_ = nullptr;
  std::vector<std::pair<double, std::vector<double>>> events_;
  Expr trigger_;
  std::vector<Expr> impulse_;
};

struct ImpulseEvent {
  double tau = 0.0;
  std::vector<double> xi;
  double cost = 0.0;  // discounted
};

struct PathRecord {
  std::vector<double> times;                 // when record_states is set
  std::vector<std::vector<double>> states;
  std::vector<uint8_t> state_flags;          // 1 = state right after an impulse
  std::vector<ImpulseEvent> impulses;
  double running_cost = 0.0;      // discounted integral of f
  double intervention_cost = 0.0; // discounted sum of B
  double terminal_cost = 0.0;     // discounted g, when the path ran to T
  bool flagged_overflow = false;
  bool flagged_budget = false;
  bool stopped_early = false;     // hit the stop rule before T
  double stop_time = 0.0;
  std::vector<double> stop_state;

  double total() const { return running_cost + intervention_cost + terminal_cost; }
};

struct StopRule {
  enum class Kind { None, FixedTime, FirstExit } kind = Kind::None;
  double s = 0.0;                  // FixedTime
  std::vector<double> lo, hi;      // FirstExit box

  static StopRule none() { return {}; }
  static StopRule fixed_time(double s);
  static StopRule first_exit(std::vector<double> lo, std::vector<double> hi);
};

/// Euler-Maruyama path of the controlled jump SDE.  Noise comes from the
/// per-path counter stream, so path i is the same regardless of n_paths.
/// Costs are discounted to t0.  When `stop` triggers, the record carries
/// (stop_time, stop_state) and no terminal cost.
PathRecord simulate_path(const ProblemSpec& spec, const Strategy& strategy,
                         const std::vector<double>& x0, double t0,
                         const PathConfig& cfg, long path_index,
                         const StopRule& stop = StopRule::none());

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double ci95 = 0.0;
  long n_paths = 0;
  double dt = 0.0;
  long flagged_overflow = 0;
  long flagged_budget = 0;
  bool unreliable = false;  // > 1% of paths flagged
  double dropped_intensity = 0.0;     // small-jump mass below the sim cutoff
  double dropped_first_moment = 0.0;
  // richardson mode
  std::vector<std::pair<double, double>> levels;  // (dt, mean)
  double extrapolated = 0.0;
  double observed_order = 0.0;

  nlohmann::ordered_json to_json() const;
};

CostEstimate estimate_cost(const ProblemSpec& spec, const Strategy& strategy,
                           const std::vector<double>& x0, double t0,
                           const PathConfig& cfg);

struct GapReport {
  double j_hat = 0.0;
  double ci95 = 0.0;
  double u_solver = 0.0;
  double gap = 0.0;  // j_hat - u_solver; >= -(ci95 + tol) when sane
  CostEstimate estimate;

  nlohmann::ordered_json to_json() const;
};

GapReport evaluate_policy_gap(const ProblemSpec& spec, const Solution& sol,
                              const std::vector<double>& x0, double t0,
                              const PathConfig& cfg);

/// Interpolated solver value at inverted time s = horizon - t0 (nearest slice).
double solution_value(const Solution& sol, const std::vector<double>& x0, double t0);

}  // namespace qvi
