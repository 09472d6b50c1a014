// Prints the lattice oracle's values for the 1-D controlled example at the
// probe points used by the acceptance suite, over a short h-refinement ladder.
// The h = 0.005 row is the frozen reference.
#include <cstdio>

#include "../tests/support/lattice_dp.hpp"

int main() {
  const double probes[5] = {0.0, 0.5, 1.2, 2.0, 2.5};
  const std::vector<double> snap_times = {0.0, 0.5};

  for (double h : {0.02, 0.01, 0.005}) {
    qvi_test::LatticeParams p;
    p.h = h;
    const qvi_test::LatticeResult r = qvi_test::run_lattice_dp(p, snap_times);
    std::printf("h=%.4f dt=%.3e steps=%ld\n", h, r.dt, r.steps);
    for (const auto& s : r.snaps) {
      std::printf("  t=%.2f:", s.t);
      for (double x : probes)
        std::printf("  V(%.1f)=%.10f", x, qvi_test::lattice_value_at(r, s, x));
      long acount = 0;
      double amin = 0.0;
      for (std::size_t i = 0; i < s.action.size(); ++i) {
        if (s.action[i]) {
          ++acount;
          const double ax = std::abs(r.x[i]);
          if (acount == 1 || ax < amin) amin = ax;
        }
      }
      std::printf("  |A|=%ld min|x|=%.4f\n", acount, acount ? amin : -1.0);
    }
  }

  // Full-precision frozen row.
  qvi_test::LatticeParams p;
  const qvi_test::LatticeResult r = qvi_test::run_lattice_dp(p, snap_times);
  std::printf("frozen h=%.4f:\n", p.h);
  for (const auto& s : r.snaps) {
    std::printf("  t=%.2f\n", s.t);
    for (double x : probes)
      std::printf("    V(%.17g) = %.17g\n", x,
                  qvi_test::lattice_value_at(r, s, x));
  }
  return 0;
}
