#pragma once

// Frozen reference values for the 1-D controlled example, produced by
// tools/lattice_probe (binomial lattice, h = 0.005, dt = 2.5e-5) and pinned
// before the finite-difference solver was tuned.  The acceptance suite
// re-runs the lattice and asserts agreement with these constants to 1e-12,
// so any accidental edit to the oracle shows up as a frozen-value mismatch.
//
// Refinement ladder (V at (2.5, t=0)):
//   h=0.02   1.1728210449
//   h=0.01   1.1728914897
//   h=0.005  1.1729089876

namespace qvi_test {

inline constexpr double kLatticeProbeX[5] = {0.0, 0.5, 1.2, 2.0, 2.5};

// t = 0.0 (full horizon remaining)
inline constexpr double kLatticeValueT0[5] = {
    0.42677753685513392,
    0.57828132440950231,
    1.0170119434897098,
    1.1229089875584637,
    1.1729089875584582,
};

// t = 0.5 (half horizon remaining)
inline constexpr double kLatticeValueT05[5] = {
    0.1247156915346795,
    0.2458265922883304,
    0.68911198997378298,
    0.81963911879691309,
    0.86963911879691314,
};

}  // namespace qvi_test
