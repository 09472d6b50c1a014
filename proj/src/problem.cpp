#include "qvi/problem.hpp"

#include <cmath>

#include "qvi/grid.hpp"

namespace qvi {

using json = nlohmann::ordered_json;

double ProblemSpec::eval_f(const double* x, double t) const {
  EvalPoint p;
  p.x = x;
  p.t = t;
  return running_cost.eval(p);
}

double ProblemSpec::eval_g(const double* x) const {
  EvalPoint p;
  p.x = x;
  return terminal_cost.eval(p);
}

double ProblemSpec::eval_B(const double* xi, double t) const {
  EvalPoint p;
  p.xi = xi;
  p.t = t;
  return intervention_cost.eval(p);
}

void ProblemSpec::eval_b(const double* x, double t, double* out) const {
  EvalPoint p;
  p.x = x;
  p.t = t;
  drift.eval(p, out);
}

void ProblemSpec::eval_sigma(const double* x, double t, double* out) const {
  EvalPoint p;
  p.x = x;
  p.t = t;
  diffusion.eval(p, out);
}

CoeffBundle eval_coeffs(const ProblemSpec& spec, const double* x, double t) {
  CoeffBundle out;
  int n = spec.dim;
  int m = spec.sigma_cols();
  out.b.resize(n);
  spec.eval_b(x, t, out.b.data());
  std::vector<double> sigma(n * m);
  spec.eval_sigma(x, t, sigma.data());
  out.A.assign(n * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < m; ++k) s += sigma[i * m + k] * sigma[j * m + k];
      out.A[i * n + j] = 0.5 * s;
    }
  out.f = spec.eval_f(x, t);
  EvalPoint p;
  p.x = x;
  p.t = t;
  for (const JumpAtom& atom : spec.jumps.atoms) {
    CoeffBundle::Atom a;
    a.lambda = atom.intensity.eval(p);
    a.z.resize(n);
    atom.size.eval(p, a.z.data());
    out.atoms.push_back(std::move(a));
  }
  return out;
}

namespace {

SpecConstants parse_constants(const json& j) {
  SpecConstants c;
  c.gamma = j.at("gamma").get<double>();
  c.delta = j.at("delta").get<double>();
  c.mu = j.at("mu").get<double>();
  c.nu = j.at("nu").get<double>();
  c.K = j.at("K").get<double>();
  c.L_bound = j.at("L_bound").get<double>();
  if (!(c.gamma >= 0.0)) throw ConfigError("constants.gamma must be >= 0");
  if (!(c.delta > 0.0 && c.delta <= 1.0))
    throw ConfigError("constants.delta must be in (0, 1]");
  if (!(c.mu > 0.0 && c.mu <= 1.0))
    throw ConfigError("constants.mu must be in (0, 1]");
  if (!(c.nu >= 0.0 && c.nu < 1.0))
    throw ConfigError("constants.nu must be in [0, 1)");
  if (!(c.K > 0.0)) throw ConfigError("constants.K must be > 0");
  if (!(c.L_bound > 0.0)) throw ConfigError("constants.L_bound must be > 0");
  return c;
}

JumpSpec parse_jumps(const json& j, int dim) {
  JumpSpec spec;
  if (j.is_null()) return spec;
  SymbolSet xt{dim, true, true, false, false};
  if (j.contains("atoms")) {
    for (const auto& a : j.at("atoms")) {
      JumpAtom atom;
      atom.intensity = CoefficientFn::from_json(a.at("intensity"), xt, "jumps.intensity");
      atom.size = VectorFn::from_json(a.at("size"), dim, xt, "jumps.size");
      spec.atoms.push_back(std::move(atom));
    }
  }
  if (j.contains("small_density") && !j.at("small_density").is_null()) {
    SmallDensity sd;
    const auto& s = j.at("small_density");
    SymbolSet radial{dim, false, false, false, true};
    sd.density = CoefficientFn::from_json(s.at("density"), radial, "jumps.small_density");
    sd.radius_cut = s.at("radius_cut").get<double>();
    if (!(sd.radius_cut > 0.0 && sd.radius_cut <= 1.0))
      throw ConfigError("jumps.small_density.radius_cut must be in (0, 1]");
    if (s.contains("directions")) {
      for (const auto& d : s.at("directions")) {
        std::vector<double> dir = d.get<std::vector<double>>();
        if (static_cast<int>(dir.size()) != dim)
          throw ConfigError("jumps.small_density.directions entries must have length dim");
        double norm = 0.0;
        for (double v : dir) norm += v * v;
        norm = std::sqrt(norm);
        if (!(norm > 0.0))
          throw ConfigError("jumps.small_density.directions entries must be nonzero");
        for (double& v : dir) v /= norm;
        sd.directions.push_back(std::move(dir));
      }
    } else {
      for (int a = 0; a < dim; ++a)
        for (double sign : {1.0, -1.0}) {
          std::vector<double> dir(dim, 0.0);
          dir[a] = sign;
          sd.directions.push_back(std::move(dir));
        }
    }
    if (s.contains("weights")) {
      sd.weights = s.at("weights").get<std::vector<double>>();
      if (sd.weights.size() != sd.directions.size())
        throw ConfigError("jumps.small_density.weights length != directions length");
      for (double w : sd.weights)
        if (!(w >= 0.0)) throw ConfigError("jumps.small_density.weights must be >= 0");
    } else {
      sd.weights.assign(sd.directions.size(), 1.0 / sd.directions.size());
    }
    spec.small_density = std::move(sd);
  }
  if (!spec.empty()) {
    if (!j.contains("order_delta_bound"))
      throw ConfigError("jumps.order_delta_bound is required when jumps are present");
    spec.order_delta_bound = j.at("order_delta_bound").get<double>();
    if (!(spec.order_delta_bound > 0.0))
      throw ConfigError("jumps.order_delta_bound must be > 0");
  }
  return spec;
}

}  // namespace

ProblemSpec parse_problem_json(const json& j, bool enforce_dominance) {
  ProblemSpec spec;
  try {
    spec.dim = j.at("dim").get<int>();
    if (spec.dim < 1 || spec.dim > 8)
      throw ConfigError("dim must be in [1, 8]");
    spec.horizon = j.at("horizon").get<double>();
    if (!(spec.horizon > 0.0)) throw ConfigError("horizon must be > 0");
    spec.discount = j.at("discount").get<double>();
    if (!(spec.discount >= 0.0)) throw ConfigError("discount must be >= 0");

    SymbolSet xt{spec.dim, true, true, false, false};
    SymbolSet x_only{spec.dim, true, false, false, false};
    SymbolSet xi_t{spec.dim, false, true, true, false};

    spec.drift = VectorFn::from_json(j.at("drift"), spec.dim, xt, "drift");
    spec.diffusion = MatrixFn::from_json(j.at("diffusion"), spec.dim, xt, "diffusion");
    spec.jumps = parse_jumps(j.contains("jumps") ? j.at("jumps") : json(nullptr), spec.dim);
    spec.running_cost = CoefficientFn::from_json(j.at("running_cost"), xt, "running_cost");
    spec.terminal_cost =
        CoefficientFn::from_json(j.at("terminal_cost"), x_only, "terminal_cost");
    spec.intervention_cost =
        CoefficientFn::from_json(j.at("intervention_cost"), xi_t, "intervention_cost");
    spec.constants = parse_constants(j.at("constants"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("problem config: ") + e.what());
  }

  const SpecConstants& c = spec.constants;
  if (enforce_dominance) {
    if (!(c.gamma + c.delta < c.mu))
      throw AssumptionError("dominance violated: gamma+delta >= mu (" +
                            format_double(c.gamma + c.delta) + " >= " +
                            format_double(c.mu) + ")");
    if (!(c.nu <= c.mu))
      throw AssumptionError("dominance violated: nu > mu");
  }
  return spec;
}

ProblemSpec parse_problem(const std::string& text, bool enforce_dominance) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("problem config: ") + e.what());
  }
  return parse_problem_json(j, enforce_dominance);
}

json render_problem(const ProblemSpec& spec) {
  json j;
  j["dim"] = spec.dim;
  j["horizon"] = spec.horizon;
  j["discount"] = spec.discount;
  j["drift"] = spec.drift.render();
  j["diffusion"] = spec.diffusion.render();
  if (spec.jumps.empty()) {
    j["jumps"] = nullptr;
  } else {
    json jj;
    if (!spec.jumps.atoms.empty()) {
      json atoms = json::array();
      for (const auto& a : spec.jumps.atoms)
        atoms.push_back({{"intensity", a.intensity.render()}, {"size", a.size.render()}});
      jj["atoms"] = atoms;
    }
    if (spec.jumps.small_density) {
      const SmallDensity& sd = *spec.jumps.small_density;
      jj["small_density"] = {{"density", sd.density.render()},
                             {"radius_cut", sd.radius_cut},
                             {"directions", sd.directions},
                             {"weights", sd.weights}};
    }
    jj["order_delta_bound"] = spec.jumps.order_delta_bound;
    j["jumps"] = jj;
  }
  j["running_cost"] = spec.running_cost.render();
  j["terminal_cost"] = spec.terminal_cost.render();
  j["intervention_cost"] = spec.intervention_cost.render();
  j["constants"] = {{"gamma", spec.constants.gamma}, {"delta", spec.constants.delta},
                    {"mu", spec.constants.mu},       {"nu", spec.constants.nu},
                    {"K", spec.constants.K},         {"L_bound", spec.constants.L_bound}};
  return j;
}

}  // namespace qvi
