#include "qvi/operators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "qvi/errors.hpp"

namespace qvi {

namespace {

// 8-point Gauss-Legendre rule on [-1, 1].
const double kGlNode[8] = {
    -0.96028985649753623, -0.79666647741362674, -0.52553240991632899,
    -0.18343464249564980, 0.18343464249564980,  0.52553240991632899,
    0.79666647741362674,  0.96028985649753623};
const double kGlWeight[8] = {
    0.10122853629037626, 0.22238103445337447, 0.31370664587788729,
    0.36268378337836198, 0.36268378337836198, 0.31370664587788729,
    0.22238103445337447, 0.10122853629037626};

std::vector<int64_t> axis_strides(const Grid& g) {
  std::vector<int64_t> s(g.dim(), 1);
  for (int a = g.dim() - 2; a >= 0; --a)
    s[a] = s[a + 1] * g.space[a + 1].count;
  return s;
}

struct RowEntry {
  int64_t flat;
  double coef;
};

// Generator stencil for an interior node: central second differences,
// first-order upwind drift, sign-split 7-point mixed stencils.  Emits raw
// entries; duplicates are merged when the matrix is assembled.
void generator_row(const Grid& g, const CoeffBundle& cb, double discount,
                   int64_t flat, const std::vector<int64_t>& stride,
                   std::vector<RowEntry>& out) {
  const int n = g.dim();
  out.clear();
  double diag = discount;
  for (int a = 0; a < n; ++a) {
    const double h = g.space[a].h();
    const double aa = cb.A[a * n + a];
    const double c2 = aa / (h * h);
    diag += 2.0 * c2;
    out.push_back({flat - stride[a], -c2});
    out.push_back({flat + stride[a], -c2});
    const double b = cb.b[a];
    if (b > 0.0) {
      out.push_back({flat + stride[a], -b / h});
      diag += b / h;
    } else if (b < 0.0) {
      out.push_back({flat - stride[a], b / h});
      diag += -b / h;
    }
    for (int c = a + 1; c < n; ++c) {
      const double ac = cb.A[a * n + c];
      if (ac == 0.0) continue;
      const double hc = g.space[c].h();
      const double q = ac / (h * hc);
      if (ac > 0.0) {
        // -2A_ac [u_{++} + u_{--} + 2u_0 - u_{+0} - u_{-0} - u_{0+} - u_{0-}] / (2 h h_c)
        out.push_back({flat + stride[a] + stride[c], -q});
        out.push_back({flat - stride[a] - stride[c], -q});
        diag += -2.0 * q;
        out.push_back({flat + stride[a], q});
        out.push_back({flat - stride[a], q});
        out.push_back({flat + stride[c], q});
        out.push_back({flat - stride[c], q});
      } else {
        out.push_back({flat + stride[a] - stride[c], q});
        out.push_back({flat - stride[a] + stride[c], q});
        diag += 2.0 * q;
        out.push_back({flat + stride[a], -q});
        out.push_back({flat - stride[a], -q});
        out.push_back({flat + stride[c], -q});
        out.push_back({flat - stride[c], -q});
      }
    }
  }
  out.push_back({flat, diag});
}

// Second-order first-derivative weights, one-sided at the edges.
void d1_weights(int i, int count, double h, int off[3], double w[3]) {
  if (i == 0) {
    off[0] = 0; off[1] = 1; off[2] = 2;
    w[0] = -1.5 / h; w[1] = 2.0 / h; w[2] = -0.5 / h;
  } else if (i == count - 1) {
    off[0] = 0; off[1] = -1; off[2] = -2;
    w[0] = 1.5 / h; w[1] = -2.0 / h; w[2] = 0.5 / h;
  } else {
    off[0] = -1; off[1] = 0; off[2] = 1;
    w[0] = -0.5 / h; w[1] = 0.0; w[2] = 0.5 / h;
  }
}

// Three-point second-derivative weights; shifted inward at the edges
// (exact for quadratics either way).
void d2_weights(int i, int count, double h, int off[3], double w[3]) {
  const double c = 1.0 / (h * h);
  if (i == 0) {
    off[0] = 0; off[1] = 1; off[2] = 2;
  } else if (i == count - 1) {
    off[0] = -2; off[1] = -1; off[2] = 0;
  } else {
    off[0] = -1; off[1] = 0; off[2] = 1;
  }
  w[0] = c; w[1] = -2.0 * c; w[2] = c;
}

bool grid_interior(const Grid& g, const std::vector<int>& multi) {
  for (int a = 0; a < g.dim(); ++a)
    if (multi[a] == 0 || multi[a] == g.space[a].count - 1) return false;
  return true;
}

}  // namespace

ExtendedField::ExtendedField(const Field& u, const ProblemSpec& spec, double margin_frac)
    : u_(u), spec_(spec) {
  margin_.resize(u.grid.dim());
  for (int a = 0; a < u.grid.dim(); ++a)
    margin_[a] = margin_frac * (u.grid.space[a].hi - u.grid.space[a].lo);
}

double ExtendedField::operator()(const double* y) const {
  const int n = u_.grid.dim();
  double clamped[8] = {};
  bool outside = false;
  for (int a = 0; a < n; ++a) {
    const Axis& ax = u_.grid.space[a];
    double c = y[a];
    if (c < ax.lo) c = ax.lo;
    if (c > ax.hi) c = ax.hi;
    const double over = std::abs(y[a] - c);
    if (over > 0.0) outside = true;
    if (over > margin_[a] + 1e-12) {
      std::ostringstream os;
      os << "extension lookup " << over << " beyond margin " << margin_[a]
         << " on axis " << a;
      throw SolveError(os.str());
    }
    clamped[a] = c;
  }
  double v = u_.interpolate(clamped);
  if (outside) v += spec_.eval_g(y) - spec_.eval_g(clamped);
  return v;
}

Field apply_L(const Field& u, const ProblemSpec& spec, double t) {
  const Grid& g = u.grid;
  const int n = g.dim();
  const auto stride = axis_strides(g);
  Field out(g, u.slice);
  std::vector<RowEntry> row;
  std::vector<double> x(n);
  const int64_t N = static_cast<int64_t>(g.node_count());
  for (int64_t flat = 0; flat < N; ++flat) {
    const std::vector<int> multi = g.multi_index(flat);
    g.node_point(flat, x.data());
    const CoeffBundle cb = eval_coeffs(spec, x.data(), t);
    if (grid_interior(g, multi)) {
      generator_row(g, cb, spec.discount, flat, stride, row);
      double v = 0.0;
      for (const RowEntry& e : row) v += e.coef * u.v[e.flat];
      out.v[flat] = v;
      continue;
    }
    double v = spec.discount * u.v[flat];
    int o1[8][3], o2[8][3];
    double w1[8][3], w2[8][3];
    for (int a = 0; a < n; ++a) {
      d1_weights(multi[a], g.space[a].count, g.space[a].h(), o1[a], w1[a]);
      d2_weights(multi[a], g.space[a].count, g.space[a].h(), o2[a], w2[a]);
    }
    for (int a = 0; a < n; ++a) {
      double d2 = 0.0, d1 = 0.0;
      for (int k = 0; k < 3; ++k) {
        d2 += w2[a][k] * u.v[flat + o2[a][k] * stride[a]];
        d1 += w1[a][k] * u.v[flat + o1[a][k] * stride[a]];
      }
      // Upwind the drift where both neighbors exist, one-sided otherwise.
      const double b = cb.b[a];
      if (multi[a] > 0 && multi[a] < g.space[a].count - 1) {
        const double h = g.space[a].h();
        if (b > 0.0)
          d1 = (u.v[flat + stride[a]] - u.v[flat]) / h;
        else if (b < 0.0)
          d1 = (u.v[flat] - u.v[flat - stride[a]]) / h;
      }
      v += -cb.A[a * n + a] * d2 - b * d1;
      for (int c = a + 1; c < n; ++c) {
        const double ac = cb.A[a * n + c];
        if (ac == 0.0) continue;
        double mix = 0.0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            mix += w1[a][i] * w1[c][j] *
                   u.v[flat + o1[a][i] * stride[a] + o1[c][j] * stride[c]];
        v += -2.0 * ac * mix;
      }
    }
    out.v[flat] = v;
  }
  return out;
}

Field apply_I(const Field& u, const ProblemSpec& spec, double t, double theta,
              const Field& gradient_source, const QuadratureConfig& quad) {
  const Grid& g = u.grid;
  const int n = g.dim();
  if (!gradient_source.grid.same_box(g))
    throw SolveError("gradient source field lives on a different grid");
  const auto stride = axis_strides(g);
  const ExtendedField ext(u, spec, quad.extension_margin);
  Field out(g, u.slice);
  const JumpSpec& js = spec.jumps;

  // Radial quadrature panels over (0, radius_cut), split at theta.
  struct Panel { double lo, hi; };
  std::vector<Panel> panels;
  if (js.small_density) {
    const double cut = js.small_density->radius_cut;
    const double split = (theta > 0.0 && theta < cut) ? theta : 0.0;
    auto add = [&](double lo, double hi) {
      if (hi <= lo) return;
      const int count = std::max(1, static_cast<int>(std::ceil(
                                        quad.nodes * (hi - lo) / cut / 8.0)));
      const double w = (hi - lo) / count;
      for (int p = 0; p < count; ++p) panels.push_back({lo + p * w, lo + (p + 1) * w});
    };
    if (split > 0.0) {
      add(0.0, split);
      add(split, cut);
    } else {
      add(0.0, cut);
    }
  }

  std::vector<double> x(n), grad(n), dest(n), z(n);
  const int64_t N = static_cast<int64_t>(g.node_count());
  for (int64_t flat = 0; flat < N; ++flat) {
    const std::vector<int> multi = g.multi_index(flat);
    g.node_point(flat, x.data());
    for (int a = 0; a < n; ++a) {
      int off[3];
      double w[3];
      d1_weights(multi[a], g.space[a].count, g.space[a].h(), off, w);
      double d = 0.0;
      for (int k = 0; k < 3; ++k)
        d += w[k] * gradient_source.v[flat + off[k] * stride[a]];
      grad[a] = d;
    }
    const double u0 = u.v[flat];
    const EvalPoint pt{x.data(), t, nullptr, 0.0};
    double val = 0.0;
    for (const JumpAtom& atom : js.atoms) {
      const double lambda = atom.intensity.eval(pt);
      if (lambda == 0.0) continue;
      atom.size.eval(pt, z.data());
      double norm2 = 0.0, comp = 0.0;
      for (int a = 0; a < n; ++a) {
        dest[a] = x[a] + z[a];
        norm2 += z[a] * z[a];
        comp += grad[a] * z[a];
      }
      double term = ext(dest.data()) - u0;
      if (std::sqrt(norm2) < 1.0) term -= comp;
      val += lambda * term;
    }
    if (js.small_density) {
      const SmallDensity& sd = *js.small_density;
      for (std::size_t d = 0; d < sd.directions.size(); ++d) {
        const double w = sd.weights[d];
        if (w == 0.0) continue;
        const std::vector<double>& dir = sd.directions[d];
        double gdot = 0.0;
        for (int a = 0; a < n; ++a) gdot += grad[a] * dir[a];
        double acc = 0.0;
        for (const Panel& p : panels) {
          const double mid = 0.5 * (p.lo + p.hi);
          const double half = 0.5 * (p.hi - p.lo);
          for (int q = 0; q < 8; ++q) {
            const double s = mid + half * kGlNode[q];
            const double rho = sd.density.eval(EvalPoint{nullptr, 0.0, nullptr, s});
            if (rho == 0.0) continue;
            for (int a = 0; a < n; ++a) dest[a] = x[a] + s * dir[a];
            const double term = ext(dest.data()) - u0 - s * gdot;
            acc += half * kGlWeight[q] * rho * term;
          }
        }
        val += w * acc;
      }
    }
    out.v[flat] = val;
  }
  return out;
}

MResult apply_M(const Field& u, const ProblemSpec& spec, double t,
                const std::vector<double>& radius, const MSearchConfig& cfg) {
  const Grid& g = u.grid;
  const int n = g.dim();
  if (static_cast<int>(radius.size()) != n)
    throw SolveError("impulse search radius has wrong dimension");
  const auto stride = axis_strides(g);

  std::vector<int64_t> K(n);
  int64_t table = 1;
  bool any = false;
  for (int a = 0; a < n; ++a) {
    K[a] = static_cast<int64_t>(std::floor(radius[a] / g.space[a].h() + 1e-9));
    K[a] = std::min<int64_t>(K[a], g.space[a].count - 1);
    if (K[a] > 0) any = true;
    table *= 2 * K[a] + 1;
  }
  if (!any) throw SolveError("empty impulse search box: radius below grid spacing");

  // B depends on the shift and the slice time only, so tabulate it per call.
  std::vector<double> btab(static_cast<std::size_t>(table));
  std::vector<double> xi(n);
  {
    std::vector<int64_t> k(n);
    for (int a = 0; a < n; ++a) k[a] = -K[a];
    for (int64_t idx = 0; idx < table; ++idx) {
      for (int a = 0; a < n; ++a) xi[a] = k[a] * g.space[a].h();
      btab[idx] = spec.eval_B(xi.data(), t);
      for (int a = n - 1; a >= 0; --a) {
        if (++k[a] <= K[a]) break;
        k[a] = -K[a];
      }
    }
  }
  std::vector<int64_t> bstride(n, 1);
  for (int a = n - 2; a >= 0; --a) bstride[a] = bstride[a + 1] * (2 * K[a + 1] + 1);

  double hmin = g.space[0].h();
  for (int a = 1; a < n; ++a) hmin = std::min(hmin, g.space[a].h());

  MResult res{Field(g, u.slice), ImpulseMap(g, u.slice)};
  std::vector<int64_t> lo(n), hi(n), k(n), bestk(n);
  std::vector<double> x(n), bestxi(n), dest(n);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);

  const int64_t N = static_cast<int64_t>(g.node_count());
  for (int64_t flat = 0; flat < N; ++flat) {
    const std::vector<int> multi = g.multi_index(flat);
    g.node_point(flat, x.data());
    bool feasible = false;
    for (int a = 0; a < n; ++a) {
      lo[a] = std::max(-K[a], static_cast<int64_t>(-multi[a]));
      hi[a] = std::min(K[a], static_cast<int64_t>(g.space[a].count - 1 - multi[a]));
      if (lo[a] < 0 || hi[a] > 0) feasible = true;
      k[a] = lo[a];
    }
    if (!feasible) throw SolveError("empty impulse search box at a grid node");

    double bestv = 0.0, bestn2 = 0.0;
    bool have = false;
    while (true) {
      bool zero = true;
      for (int a = 0; a < n; ++a)
        if (k[a] != 0) { zero = false; break; }
      if (!zero) {
        int64_t uoff = 0, boff = 0;
        double n2 = 0.0;
        for (int a = 0; a < n; ++a) {
          uoff += k[a] * stride[a];
          boff += (k[a] + K[a]) * bstride[a];
          const double xia = k[a] * g.space[a].h();
          n2 += xia * xia;
        }
        const double v = u.v[flat + uoff] + btab[boff];
        bool take = !have;
        if (have) {
          if (v < bestv) {
            take = true;
          } else if (v == bestv) {
            if (n2 < bestn2) {
              take = true;
            } else if (n2 == bestn2) {
              for (int a = 0; a < n; ++a) {
                if (k[a] != bestk[a]) { take = k[a] < bestk[a]; break; }
              }
            }
          }
        }
        if (take) {
          have = true;
          bestv = v;
          bestn2 = n2;
          bestk = k;
        }
      }
      int a = n - 1;
      for (; a >= 0; --a) {
        if (++k[a] <= hi[a]) break;
        k[a] = lo[a];
      }
      if (a < 0) break;
    }
    if (!have) throw SolveError("empty impulse search box at a grid node");
    for (int a = 0; a < n; ++a) bestxi[a] = bestk[a] * g.space[a].h();

    if (cfg.refine) {
      std::vector<double> cand = bestxi;
      double candv = bestv;
      bool improved = false;
      for (int a = 0; a < n; ++a) {
        const double h = g.space[a].h();
        const double wl = std::max({cand[a] - h, -multi[a] * h, -radius[a]});
        const double wr = std::min(
            {cand[a] + h, (g.space[a].count - 1 - multi[a]) * h, radius[a]});
        if (wr - wl < 1e-14) continue;
        auto phi = [&](double xia) {
          for (int c = 0; c < n; ++c) dest[c] = x[c] + cand[c];
          dest[a] = x[a] + xia;
          std::vector<double> shift = cand;
          shift[a] = xia;
          return u.interpolate(dest.data()) + spec.eval_B(shift.data(), t);
        };
        double aa = wl, bb = wr;
        double x1 = bb - gr * (bb - aa), x2 = aa + gr * (bb - aa);
        double f1 = phi(x1), f2 = phi(x2);
        double bx = f1 < f2 ? x1 : x2;
        double bf = std::min(f1, f2);
        for (int it = 0; it < cfg.golden_iters; ++it) {
          if (f1 < f2) {
            bb = x2; x2 = x1; f2 = f1;
            x1 = bb - gr * (bb - aa);
            f1 = phi(x1);
          } else {
            aa = x1; x1 = x2; f1 = f2;
            x2 = aa + gr * (bb - aa);
            f2 = phi(x2);
          }
          if (f1 < bf) { bf = f1; bx = x1; }
          if (f2 < bf) { bf = f2; bx = x2; }
        }
        const double fl = phi(wl), fr = phi(wr);
        if (fl < bf) { bf = fl; bx = wl; }
        if (fr < bf) { bf = fr; bx = wr; }
        if (bf < candv) {
          double norm = 0.0;
          for (int c = 0; c < n; ++c) {
            const double xic = (c == a) ? bx : cand[c];
            norm += xic * xic;
          }
          if (std::sqrt(norm) >= 0.5 * hmin) {
            cand[a] = bx;
            candv = bf;
            improved = true;
          }
        }
      }
      if (improved && candv < bestv) {
        bestxi = cand;
        bestv = candv;
      }
    }

    res.mu.v[flat] = bestv;
    res.xi.set(flat, bestxi.data());
  }
  return res;
}

OperatorMatrix assemble_generator(const Grid& g, const ProblemSpec& spec, double t,
                                  const BoundaryRule& rule, double slice_s) {
  const int n = g.dim();
  const int64_t N = static_cast<int64_t>(g.node_count());
  const auto stride = axis_strides(g);
  OperatorMatrix out;
  out.L.resize(N, N);
  out.boundary_rhs = Eigen::VectorXd::Zero(N);
  out.is_boundary.assign(static_cast<std::size_t>(N), 0);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(N) * (2 + 2 * n + 2 * n * n));
  std::vector<RowEntry> row;
  std::vector<double> x(n), xin(n);

  for (int64_t flat = 0; flat < N; ++flat) {
    const std::vector<int> multi = g.multi_index(flat);
    g.node_point(flat, x.data());
    if (grid_interior(g, multi)) {
      const CoeffBundle cb = eval_coeffs(spec, x.data(), t);
      generator_row(g, cb, spec.discount, flat, stride, row);
      for (const RowEntry& e : row)
        trips.emplace_back(static_cast<int>(flat), static_cast<int>(e.flat), e.coef);
      continue;
    }
    out.is_boundary[static_cast<std::size_t>(flat)] = 1;
    if (rule.kind == BoundaryRule::kDirichlet) {
      trips.emplace_back(static_cast<int>(flat), static_cast<int>(flat), 1.0);
      std::vector<double> xv(x);
      out.boundary_rhs[flat] = rule.data(xv, slice_s);
      continue;
    }
    std::vector<int> inward = multi;
    for (int a = 0; a < n; ++a) {
      if (inward[a] == 0) inward[a] = 1;
      else if (inward[a] == g.space[a].count - 1) inward[a] = g.space[a].count - 2;
    }
    const int64_t nb = static_cast<int64_t>(g.flat_index(inward));
    g.node_point(nb, xin.data());
    trips.emplace_back(static_cast<int>(flat), static_cast<int>(flat), 1.0);
    trips.emplace_back(static_cast<int>(flat), static_cast<int>(nb), -1.0);
    out.boundary_rhs[flat] = spec.eval_g(x.data()) - spec.eval_g(xin.data());
  }
  out.L.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace qvi
