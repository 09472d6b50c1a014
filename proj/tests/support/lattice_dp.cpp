#include "lattice_dp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qvi_test {

LatticeResult run_lattice_dp(const LatticeParams& p,
                             const std::vector<double>& snap_times) {
  const long n = std::lround((p.hi - p.lo) / p.h) + 1;
  if (n < 3) throw std::runtime_error("lattice too coarse");
  const double dt = p.h * p.h / (2.0 * p.A);
  const long steps = std::lround(p.T / dt);

  LatticeResult res;
  res.dt = dt;
  res.steps = steps;
  res.x.resize(n);
  for (long i = 0; i < n; ++i) res.x[i] = p.lo + i * p.h;

  // Which backward step index to record for each requested time.
  std::vector<long> want(snap_times.size());
  for (std::size_t s = 0; s < snap_times.size(); ++s) {
    long k = std::lround((p.T - snap_times[s]) / dt);
    want[s] = std::min(std::max(k, 0L), steps);
  }
  res.snaps.resize(snap_times.size());

  std::vector<double> fv(n);
  for (long i = 0; i < n; ++i) fv[i] = p.f(res.x[i]);

  std::vector<double> v(n), cont(n), m(n);
  std::vector<uint8_t> act(n, 0);
  for (long i = 0; i < n; ++i) v[i] = p.g(res.x[i]);

  auto record = [&](long k) {
    for (std::size_t s = 0; s < want.size(); ++s) {
      if (want[s] != k) continue;
      res.snaps[s].t = p.T - k * dt;
      res.snaps[s].value = v;
      res.snaps[s].action = act;
    }
  };
  record(0);

  const double step_cost = p.prop_cost * p.h;
  for (long k = 1; k <= steps; ++k) {
    for (long i = 0; i < n; ++i) {
      const long up = std::min(i + 1, n - 1);
      const long dn = std::max(i - 1, 0L);
      cont[i] = fv[i] * dt + 0.5 * (v[up] + v[dn]);
    }
    // MV over the lattice shift grid with |.|-linear cost: two running-min
    // sweeps compute min_y [cont(y) + prop*|y - x|] in O(n).
    m = cont;
    for (long i = 1; i < n; ++i) m[i] = std::min(m[i], m[i - 1] + step_cost);
    for (long i = n - 2; i >= 0; --i) m[i] = std::min(m[i], m[i + 1] + step_cost);
    for (long i = 0; i < n; ++i) {
      const double mv = m[i] + p.fixed_cost;
      if (mv < cont[i]) {
        v[i] = mv;
        act[i] = 1;
      } else {
        v[i] = cont[i];
        act[i] = 0;
      }
    }
    record(k);
  }
  return res;
}

double lattice_value_at(const LatticeResult& r, const LatticeSnapshot& snap,
                        double x) {
  const double lo = r.x.front(), hi = r.x.back();
  const double h = r.x[1] - r.x[0];
  double c = std::min(std::max(x, lo), hi);
  const long i = std::min(static_cast<long>((c - lo) / h),
                          static_cast<long>(r.x.size()) - 2);
  const double w = (c - r.x[i]) / h;
  return (1.0 - w) * snap.value[i] + w * snap.value[i + 1];
}

}  // namespace qvi_test
