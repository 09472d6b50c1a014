#include "qvi/assumptions.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "qvi/grid.hpp"
#include "qvi/rng.hpp"

namespace qvi {

using json = nlohmann::ordered_json;

SampleBox SampleBox::from_axes(const std::vector<double>& lo,
                               const std::vector<double>& hi) {
  SampleBox b;
  b.lo = lo;
  b.hi = hi;
  return b;
}

namespace {

double norm2(const double* v, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

struct Sampler {
  RngStream rng;
  const SampleBox& box;
  double horizon;
  int dim;

  Sampler(const SampleBox& b, double T, uint64_t seed, uint64_t stream)
      : rng(seed, RngStream::kValidation, stream), box(b), horizon(T),
        dim(static_cast<int>(b.lo.size())) {}

  void point(double* x) {
    for (int a = 0; a < dim; ++a)
      x[a] = box.lo[a] + rng.uniform() * (box.hi[a] - box.lo[a]);
  }
  // Impulse displacements range over the box widths in both directions.
  void impulse(double* xi) {
    for (int a = 0; a < dim; ++a) {
      double w = box.hi[a] - box.lo[a];
      xi[a] = (2.0 * rng.uniform() - 1.0) * w;
    }
  }
  double time() { return rng.uniform() * horizon; }
};

// Composite Gauss-Legendre (8-point panels) used for the order-delta moment.
double radial_moment(const SmallDensity& sd, double exponent, int panels = 32) {
  static const double gl_x[4] = {0.1834346424956498, 0.5255324099163290,
                                 0.7966664774136267, 0.9602898564975363};
  static const double gl_w[4] = {0.3626837833783620, 0.3137066458778873,
                                 0.2223810344533745, 0.1012285362903763};
  double total = 0.0;
  double width = sd.radius_cut / panels;
  for (int p = 0; p < panels; ++p) {
    double a = p * width, b = a + width;
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int k = 0; k < 4; ++k) {
      for (double sign : {-1.0, 1.0}) {
        double s = mid + sign * half * gl_x[k];
        EvalPoint pt;
        pt.s = s;
        total += half * gl_w[k] * std::pow(s, exponent) * sd.density.eval(pt);
      }
    }
  }
  return total;
}

}  // namespace

double estimate_impulse_cost_growth(const ProblemSpec& spec, const SampleBox& box,
                                    int samples, uint64_t seed) {
  Sampler smp(box, spec.horizon, seed, 55);
  int n = spec.dim;
  std::vector<double> xi(n);
  double c = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    smp.impulse(xi.data());
    double r = norm2(xi.data(), n);
    if (r < 1e-8) continue;
    double t = smp.time();
    double B = spec.eval_B(xi.data(), t);
    c = std::fmin(c, (B - spec.constants.L_bound) / std::pow(r, spec.constants.mu));
  }
  return c;
}

AssumptionReport validate_assumptions(const ProblemSpec& spec, const SampleBox& box,
                                      int samples, uint64_t seed) {
  AssumptionReport report;
  report.seed = seed;
  report.samples = samples;
  const int n = spec.dim;
  const int m = spec.sigma_cols();
  const SpecConstants& c = spec.constants;
  const double tol = 1e-9;

  auto add = [&](AssumptionCheck chk) {
    if (chk.status == "fail") report.passed = false;
    report.checks.push_back(std::move(chk));
  };

  std::vector<double> x(n), y(n), xi(n), eta(n), sum(n);
  std::vector<double> bx(n), by(n), sx(n * m), sy(n * m);

  {  // 2: Lipschitz coefficients, plus A = 1/2 sigma sigma^T PSD.
    AssumptionCheck chk{2, "lipschitz_coefficients", "pass", 0.0, 0.0, {}, ""};
    Sampler smp(box, spec.horizon, seed, 2);
    double lip = 0.0, min_eig = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
      smp.point(x.data());
      smp.point(y.data());
      double t = smp.time();
      spec.eval_b(x.data(), t, bx.data());
      spec.eval_b(y.data(), t, by.data());
      spec.eval_sigma(x.data(), t, sx.data());
      spec.eval_sigma(y.data(), t, sy.data());
      for (int k = 0; k < n; ++k) bx[k] -= by[k];
      for (int k = 0; k < n * m; ++k) sx[k] -= sy[k];
      for (int k = 0; k < n; ++k) y[k] = x[k] - y[k];
      double d = norm2(y.data(), n);
      if (d > 1e-10) {
        double num = std::hypot(norm2(bx.data(), n), norm2(sx.data(), n * m));
        if (num / d > lip) {
          lip = num / d;
          chk.worst_point.assign(x.begin(), x.end());
        }
      }
      CoeffBundle cb = eval_coeffs(spec, x.data(), t);
      Eigen::MatrixXd A(n, n);
      for (int r = 0; r < n; ++r)
        for (int q = 0; q < n; ++q) A(r, q) = cb.A[r * n + q];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
      min_eig = std::fmin(min_eig, eig.eigenvalues().minCoeff());
    }
    chk.estimate = lip;
    chk.margin = min_eig + 1e-12;
    if (!std::isfinite(lip) || min_eig < -1e-12) {
      chk.status = "fail";
      chk.note = "diffusion matrix not PSD or non-finite Lipschitz quotient";
    } else {
      chk.note = "max sampled Lipschitz quotient of (b, sigma); margin is min eig of A";
    }
    add(chk);
  }

  {  // 3: growth |b|, |sigma| <= L(1 + |x|^nu).
    AssumptionCheck chk{3, "coefficient_growth", "pass", 0.0, 0.0, {}, ""};
    Sampler smp(box, spec.horizon, seed, 3);
    double L = 0.0;
    for (int i = 0; i < samples; ++i) {
      smp.point(x.data());
      double t = smp.time();
      spec.eval_b(x.data(), t, bx.data());
      spec.eval_sigma(x.data(), t, sx.data());
      double denom = 1.0 + std::pow(norm2(x.data(), n), c.nu);
      double q = std::hypot(norm2(bx.data(), n), norm2(sx.data(), n * m)) / denom;
      if (q > L) {
        L = q;
        chk.worst_point.assign(x.begin(), x.end());
      }
    }
    chk.estimate = L;
    if (!std::isfinite(L)) chk.status = "fail";
    chk.note = "fitted growth constant at declared nu; Lipschitz bound reported under id 2";
    add(chk);
  }

  {  // 4: Hoelder continuity of f and g at declared (gamma, delta).
    AssumptionCheck chk{4, "cost_hoelder", "pass", 0.0, 0.0, {}, ""};
    Sampler smp(box, spec.horizon, seed, 4);
    double C = 0.0;
    for (int i = 0; i < samples; ++i) {
      smp.point(x.data());
      smp.point(y.data());
      double t = smp.time();
      double dx = 0.0;
      for (int k = 0; k < n; ++k) {
        double d = x[k] - y[k];
        dx += d * d;
      }
      dx = std::sqrt(dx);
      if (dx < 1e-10) continue;
      double denom = (1.0 + std::pow(norm2(x.data(), n), c.gamma) +
                      std::pow(norm2(y.data(), n), c.gamma)) *
                     std::pow(dx, c.delta);
      double qf = std::fabs(spec.eval_f(x.data(), t) - spec.eval_f(y.data(), t)) / denom;
      double qg = std::fabs(spec.eval_g(x.data()) - spec.eval_g(y.data())) / denom;
      double q = std::fmax(qf, qg);
      if (q > C) {
        C = q;
        chk.worst_point.assign(x.begin(), x.end());
      }
    }
    chk.estimate = C;
    if (!std::isfinite(C)) chk.status = "fail";
    chk.note = "fitted Hoelder constant for f and g at declared gamma, delta";
    add(chk);
  }

  {  // 5: lower bounds f, g >= -L and B >= L + c |xi|^mu with c > 0.
    AssumptionCheck chk{5, "cost_lower_bounds", "pass", 0.0, 0.0, {}, ""};
    Sampler smp(box, spec.horizon, seed, 5);
    double fg_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
      smp.point(x.data());
      double t = smp.time();
      double mf = spec.eval_f(x.data(), t) + c.L_bound;
      double mg = spec.eval_g(x.data()) + c.L_bound;
      if (std::fmin(mf, mg) < fg_margin) {
        fg_margin = std::fmin(mf, mg);
        chk.worst_point.assign(x.begin(), x.end());
      }
    }
    double growth = estimate_impulse_cost_growth(spec, box, samples, seed);
    chk.estimate = growth;
    chk.margin = std::fmin(fg_margin, growth);
    if (fg_margin < -tol || !(growth > 0.0)) {
      chk.status = "fail";
      chk.note = "f/g below -L or impulse cost growth coefficient not positive";
    } else {
      chk.note = "estimate is the fitted impulse-cost growth coefficient";
    }
    add(chk);
  }

  {  // 6: B nonincreasing in t; subadditive with declared slack K.
    AssumptionCheck chk{6, "intervention_cost_structure", "pass", 0.0, 0.0, {}, ""};
    Sampler smp(box, spec.horizon, seed, 6);
    double mono = std::numeric_limits<double>::infinity();
    double sub = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
      smp.impulse(xi.data());
      smp.impulse(eta.data());
      double t0 = smp.time(), t1 = smp.time();
      if (t0 > t1) std::swap(t0, t1);
      mono = std::fmin(mono, spec.eval_B(xi.data(), t0) - spec.eval_B(xi.data(), t1));
      for (int k = 0; k < n; ++k) sum[k] = xi[k] + eta[k];
      double slack = spec.eval_B(xi.data(), t0) + spec.eval_B(eta.data(), t0) -
                     spec.eval_B(sum.data(), t0) - c.K;
      if (slack < sub) {
        sub = slack;
        chk.worst_point = xi;
        chk.worst_point.insert(chk.worst_point.end(), eta.begin(), eta.end());
      }
    }
    chk.margin = std::fmin(mono, sub);
    chk.estimate = sub;
    if (chk.margin < -tol) {
      chk.status = "fail";
      chk.note = mono < -tol ? "B increases with t" : "subadditivity slack below declared K";
    } else {
      chk.note = "margin is min of time-monotonicity and subadditivity slack minus K";
    }
    add(chk);
  }

  {  // 7: declared-constant dominance (exact arithmetic, not sampled).
    AssumptionCheck chk{7, "exponent_dominance", "pass", 0.0, 0.0, {}, ""};
    chk.margin = std::fmin(c.mu - c.gamma - c.delta, c.mu - c.nu);
    if (!(c.gamma + c.delta < c.mu) || !(c.nu <= c.mu)) chk.status = "fail";
    chk.note = "gamma+delta < mu and nu <= mu on declared constants";
    add(chk);
  }

  {  // 8: no profitable terminal impulse: g(x) <= g(x+xi) + B(xi, T).
    AssumptionCheck chk{8, "terminal_no_impulse", "pass", 0.0, 0.0, {}, ""};
    Sampler smp(box, spec.horizon, seed, 8);
    double margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
      smp.point(x.data());
      smp.impulse(xi.data());
      for (int k = 0; k < n; ++k) sum[k] = x[k] + xi[k];
      double q = spec.eval_g(sum.data()) + spec.eval_B(xi.data(), spec.horizon) -
                 spec.eval_g(x.data());
      if (q < margin) {
        margin = q;
        chk.worst_point = x;
        chk.worst_point.insert(chk.worst_point.end(), xi.begin(), xi.end());
      }
    }
    chk.margin = margin;
    if (margin < -tol) chk.status = "fail";
    add(chk);
  }

  {  // 9: representation of the jump compensator; holds by construction here.
    AssumptionCheck chk{9, "jump_measure_representation", "skipped", 0.0, 0.0, {}, ""};
    chk.note = "jump measure is declared directly in atom + radial-density form";
    add(chk);
  }

  {  // 10: order-delta moment of the |z| < 1 jump mass vs declared bound.
    AssumptionCheck chk{10, "jump_order_delta", "pass", 0.0, 0.0, {}, ""};
    if (spec.jumps.empty()) {
      chk.status = "skipped";
      chk.note = "no jump component";
    } else {
      Sampler smp(box, spec.horizon, seed, 10);
      double small_part = spec.jumps.small_density
                              ? radial_moment(*spec.jumps.small_density, c.delta)
                              : 0.0;
      double worst = 0.0;
      for (int i = 0; i < samples; ++i) {
        smp.point(x.data());
        double t = smp.time();
        CoeffBundle cb = eval_coeffs(spec, x.data(), t);
        double mass = small_part;
        for (const auto& atom : cb.atoms) {
          double r = norm2(atom.z.data(), n);
          if (r < 1.0) mass += atom.lambda * std::pow(r, c.delta);
        }
        if (mass > worst) {
          worst = mass;
          chk.worst_point.assign(x.begin(), x.end());
        }
      }
      chk.estimate = worst;
      chk.margin = spec.jumps.order_delta_bound - worst;
      if (chk.margin < -tol) chk.status = "fail";
      chk.note = "max sampled order-delta moment of the small-jump mass";
    }
    add(chk);
  }

  {  // 11: continuity of the jump measure in (x, t), weighted total variation.
    AssumptionCheck chk{11, "jump_measure_continuity", "pass", 0.0, 0.0, {}, ""};
    if (spec.jumps.atoms.empty()) {
      chk.status = "skipped";
      chk.note = spec.jumps.empty() ? "no jump component"
                                    : "radial density is state-independent";
    } else {
      Sampler smp(box, spec.horizon, seed, 11);
      double scale = 0.0;
      for (int a = 0; a < n; ++a) scale = std::fmax(scale, box.hi[a] - box.lo[a]);
      double step = 1e-3 * scale;
      double modulus = 0.0, intensity_scale = 1.0;
      std::vector<double> zx(n), zy(n);
      for (int i = 0; i < samples; ++i) {
        smp.point(x.data());
        double t = smp.time();
        for (int k = 0; k < n; ++k)
          y[k] = x[k] + step * (2.0 * smp.rng.uniform() - 1.0);
        double dist = 0.0;
        EvalPoint px, py;
        px.x = x.data();
        px.t = t;
        py.x = y.data();
        py.t = t;
        for (const auto& atom : spec.jumps.atoms) {
          double lx = atom.intensity.eval(px), ly = atom.intensity.eval(py);
          intensity_scale = std::fmax(intensity_scale, lx);
          atom.size.eval(px, zx.data());
          atom.size.eval(py, zy.data());
          for (int k = 0; k < n; ++k) zy[k] -= zx[k];
          double w = std::fmin(1.0, std::pow(norm2(zx.data(), n), 2.0));
          if (norm2(zy.data(), n) > 1e-12)
            dist += (lx + ly) * w;  // atom moved: mass counted on both sides
          else
            dist += std::fabs(lx - ly) * w;
        }
        if (dist > modulus) {
          modulus = dist;
          chk.worst_point.assign(x.begin(), x.end());
        }
      }
      chk.estimate = modulus;
      double threshold = 10.0 * intensity_scale * std::sqrt(step / scale);
      chk.margin = threshold - modulus;
      if (modulus > threshold) {
        chk.status = "fail";
        chk.note = "jump measure jumps under small state perturbations";
      } else {
        chk.note = "weighted TV modulus over perturbations of size 1e-3 box width";
      }
    }
    add(chk);
  }

  return report;
}

json AssumptionReport::to_json() const {
  json j;
  j["passed"] = passed;
  j["sampled"] = sampled;
  j["seed"] = seed;
  j["samples"] = samples;
  j["checks"] = json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"id", c.id},
                           {"name", c.name},
                           {"status", c.status},
                           {"margin", c.margin},
                           {"estimate", c.estimate},
                           {"worst_point", c.worst_point},
                           {"note", c.note}});
  }
  return j;
}

AssumptionReport AssumptionReport::from_json(const json& j) {
  AssumptionReport r;
  r.passed = j.at("passed").get<bool>();
  r.sampled = j.at("sampled").get<bool>();
  r.seed = j.at("seed").get<uint64_t>();
  r.samples = j.at("samples").get<int>();
  for (const auto& cj : j.at("checks")) {
    AssumptionCheck c;
    c.id = cj.at("id").get<int>();
    c.name = cj.at("name").get<std::string>();
    c.status = cj.at("status").get<std::string>();
    c.margin = cj.at("margin").get<double>();
    c.estimate = cj.at("estimate").get<double>();
    c.worst_point = cj.at("worst_point").get<std::vector<double>>();
    c.note = cj.at("note").get<std::string>();
    r.checks.push_back(std::move(c));
  }
  return r;
}

}  // namespace qvi
