#pragma once

#include <algorithm>

namespace qvi {

/// Penalty family for the constraint u <= Psi:
///   beta_eps(x) = x / eps                 for x >= 0
///   beta_eps(x) = eps * x / (eps^2 - x)   for x < 0   (clamped to >= -1)
///
/// C^1 at 0 with slope 1/eps on both sides, strictly increasing, convex,
/// bounded below by -eps, and for fixed x < 0 it vanishes as eps -> 0, so
/// the penalized equation recovers the unconstrained PDE in the
/// continuation region.  (A negative branch with an O(1) limit, such as
/// e^{x/eps} - 1, would inject a permanent unit source wherever u << Psi
/// and the scheme would not converge to the obstacle problem.)
struct PenaltyFamily {
  double epsilon = 1.0;

  double value(double x) const {
    if (x >= 0.0) return x / epsilon;
    return std::max(-1.0, epsilon * x / (epsilon * epsilon - x));
  }

  double deriv(double x) const {
    if (x >= 0.0) return 1.0 / epsilon;
    const double raw = epsilon * x / (epsilon * epsilon - x);
    if (raw <= -1.0) return 0.0;
    const double d = epsilon * epsilon - x;
    return epsilon * epsilon * epsilon / (d * d);
  }
};

}  // namespace qvi
