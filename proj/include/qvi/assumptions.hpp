#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qvi/problem.hpp"

namespace qvi {

/// Axis-aligned sampling box for the statistical assumption checks.
struct SampleBox {
  std::vector<double> lo, hi;

  static SampleBox from_axes(const std::vector<double>& lo, const std::vector<double>& hi);
};

struct AssumptionCheck {
  int id = 0;                // numbered as in the standing-assumption list
  std::string name;
  std::string status;        // "pass" | "fail" | "skipped"
  double margin = 0.0;       // signed distance to the violated boundary
  double estimate = 0.0;     // fitted constant where meaningful
  std::vector<double> worst_point;
  std::string note;
};

struct AssumptionReport {
  bool passed = true;
  bool sampled = true;
  uint64_t seed = 0;
  int samples = 0;
  std::vector<AssumptionCheck> checks;

  nlohmann::ordered_json to_json() const;
  static AssumptionReport from_json(const nlohmann::ordered_json& j);
};

/// Sampled validation of the standing assumptions on the given box.  The
/// checks are statistical evidence, not proofs: estimates are max/min over
/// `samples` deterministic draws from `seed`.
AssumptionReport validate_assumptions(const ProblemSpec& spec, const SampleBox& box,
                                      int samples, uint64_t seed);

/// Smallest sampled value of (B(xi,t) - L) / |xi|^mu; the coefficient in the
/// impulse-cost lower bound, reused for the intervention search radius.
double estimate_impulse_cost_growth(const ProblemSpec& spec, const SampleBox& box,
                                    int samples, uint64_t seed);

}  // namespace qvi
