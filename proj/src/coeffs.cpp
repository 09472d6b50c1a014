#include "qvi/coeffs.hpp"

#include <algorithm>
#include <cmath>

#include "qvi/grid.hpp"

namespace qvi {

using json = nlohmann::ordered_json;

namespace {

std::string join_terms(const std::vector<std::string>& terms) {
  std::string out;
  for (const auto& t : terms) {
    if (!out.empty()) out += " + ";
    out += t;
  }
  return out.empty() ? "0" : out;
}

// Affine/quadratic builtins act on the slot's vector symbol: x when the slot
// allows x, otherwise xi.
std::string vec_symbol(const SymbolSet& allowed, const std::string& slot) {
  if (allowed.x) return "x";
  if (allowed.xi) return "xi";
  throw ConfigError(slot + ": affine/quadratic builtin needs a vector symbol");
}

std::string builtin_to_source(const json& j, const SymbolSet& allowed,
                              const std::string& slot) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "constant") return format_double(j.at("value").get<double>());
  const std::string sym = vec_symbol(allowed, slot);
  if (type == "affine" || type == "quadratic") {
    std::vector<std::string> terms;
    terms.push_back(format_double(j.at("c0").get<double>()));
    auto c = j.at("c");
    if (static_cast<int>(c.size()) != allowed.dim)
      throw ConfigError(slot + ": builtin coefficient length != dim");
    for (int i = 0; i < allowed.dim; ++i) {
      double ci = c[i].get<double>();
      if (ci != 0.0)
        terms.push_back("(" + format_double(ci) + ")*" + sym + "[" + std::to_string(i) + "]");
    }
    if (type == "quadratic") {
      auto Q = j.at("Q");
      if (static_cast<int>(Q.size()) != allowed.dim)
        throw ConfigError(slot + ": builtin Q shape != dim x dim");
      for (int i = 0; i < allowed.dim; ++i) {
        if (static_cast<int>(Q[i].size()) != allowed.dim)
          throw ConfigError(slot + ": builtin Q shape != dim x dim");
        for (int k = 0; k < allowed.dim; ++k) {
          double q = Q[i][k].get<double>();
          if (q != 0.0)
            terms.push_back("(" + format_double(q) + ")*" + sym + "[" + std::to_string(i) +
                            "]*" + sym + "[" + std::to_string(k) + "]");
        }
      }
    }
    return join_terms(terms);
  }
  throw ConfigError(slot + ": unknown coefficient type '" + type + "'");
}

}  // namespace

CoefficientFn CoefficientFn::from_expression(const std::string& src,
                                             const SymbolSet& allowed) {
  CoefficientFn fn;
  fn.kind_ = Kind::Expression;
  fn.expr_ = Expr::compile(src, allowed);
  fn.original_ = src;
  return fn;
}

CoefficientFn CoefficientFn::from_json(const json& j, const SymbolSet& allowed,
                                       const std::string& slot) {
  try {
    if (j.is_number()) {
      CoefficientFn fn;
      fn.expr_ = Expr::compile(format_double(j.get<double>()), allowed);
      fn.original_ = j;
      return fn;
    }
    if (j.is_string()) {
      CoefficientFn fn = from_expression(j.get<std::string>(), allowed);
      fn.original_ = j;
      return fn;
    }
    if (j.is_object()) {
      const std::string type = j.at("type").get<std::string>();
      if (type == "table") {
        CoefficientFn fn;
        fn.kind_ = Kind::Table;
        fn.original_ = j;
        const std::string var = j.at("var").get<std::string>();
        if (var == "t") {
          if (!allowed.t) throw ConfigError(slot + ": table var 't' not allowed");
          fn.table_var_ = 't';
        } else if (var == "s") {
          if (!allowed.s) throw ConfigError(slot + ": table var 's' not allowed");
          fn.table_var_ = 's';
        } else if (var.rfind("x[", 0) == 0 || var.rfind("xi[", 0) == 0) {
          bool is_xi = var[1] == 'i';
          if (is_xi ? !allowed.xi : !allowed.x)
            throw ConfigError(slot + ": table var '" + var + "' not allowed");
          int idx = std::stoi(var.substr(is_xi ? 3 : 2));
          if (idx < 0 || idx >= allowed.dim)
            throw ConfigError(slot + ": table var index out of range");
          fn.table_var_ = is_xi ? 'i' : 'x';
          fn.table_index_ = idx;
        } else {
          throw ConfigError(slot + ": bad table var '" + var + "'");
        }
        for (const auto& p : j.at("points")) {
          if (p.size() != 2) throw ConfigError(slot + ": table point needs [v, y]");
          fn.table_x_.push_back(p[0].get<double>());
          fn.table_y_.push_back(p[1].get<double>());
        }
        if (fn.table_x_.size() < 2) throw ConfigError(slot + ": table needs >= 2 points");
        if (!std::is_sorted(fn.table_x_.begin(), fn.table_x_.end()))
          throw ConfigError(slot + ": table knots must be increasing");
        return fn;
      }
      CoefficientFn fn;
      fn.expr_ = Expr::compile(builtin_to_source(j, allowed, slot), allowed);
      fn.original_ = j;
      return fn;
    }
  } catch (const ExprError& e) {
    throw ConfigError(slot + ": " + e.what() + " (column " + std::to_string(e.col) + ")");
  }
  throw ConfigError(slot + ": coefficient must be a number, string or object");
}

double CoefficientFn::eval(const EvalPoint& p) const {
  if (kind_ == Kind::Expression) return expr_.eval(p);
  double v = 0.0;
  switch (table_var_) {
    case 't': v = p.t; break;
    case 's': v = p.s; break;
    case 'x': v = p.x[table_index_]; break;
    case 'i': v = p.xi[table_index_]; break;
  }
  if (v <= table_x_.front()) return table_y_.front();
  if (v >= table_x_.back()) return table_y_.back();
  auto it = std::upper_bound(table_x_.begin(), table_x_.end(), v);
  size_t hi = static_cast<size_t>(it - table_x_.begin());
  size_t lo = hi - 1;
  double w = (v - table_x_[lo]) / (table_x_[hi] - table_x_[lo]);
  return table_y_[lo] + w * (table_y_[hi] - table_y_[lo]);
}

bool CoefficientFn::uses_x() const {
  return kind_ == Kind::Table ? table_var_ == 'x' : expr_.uses_x();
}
bool CoefficientFn::uses_t() const {
  return kind_ == Kind::Table ? table_var_ == 't' : expr_.uses_t();
}
bool CoefficientFn::uses_xi() const {
  return kind_ == Kind::Table ? table_var_ == 'i' : expr_.uses_xi();
}
bool CoefficientFn::is_constant() const {
  return kind_ == Kind::Expression && expr_.is_constant();
}

VectorFn VectorFn::from_json(const json& j, int dim, const SymbolSet& allowed,
                             const std::string& slot) {
  VectorFn v;
  if (j.is_array()) {
    if (static_cast<int>(j.size()) != dim)
      throw ConfigError(slot + ": expected " + std::to_string(dim) +
                        " components, got " + std::to_string(j.size()));
    for (int i = 0; i < dim; ++i)
      v.comp.push_back(
          CoefficientFn::from_json(j[i], allowed, slot + "[" + std::to_string(i) + "]"));
    return v;
  }
  if (dim != 1)
    throw ConfigError(slot + ": scalar given but dim = " + std::to_string(dim));
  v.comp.push_back(CoefficientFn::from_json(j, allowed, slot));
  return v;
}

void VectorFn::eval(const EvalPoint& p, double* out) const {
  for (size_t i = 0; i < comp.size(); ++i) out[i] = comp[i].eval(p);
}

json VectorFn::render() const {
  if (comp.size() == 1) return comp[0].render();
  json arr = json::array();
  for (const auto& c : comp) arr.push_back(c.render());
  return arr;
}

MatrixFn MatrixFn::from_json(const json& j, int dim, const SymbolSet& allowed,
                             const std::string& slot) {
  MatrixFn m;
  if (j.is_array()) {
    m.rows = static_cast<int>(j.size());
    if (m.rows != dim)
      throw ConfigError(slot + ": expected " + std::to_string(dim) + " rows");
    for (int r = 0; r < m.rows; ++r) {
      if (!j[r].is_array()) throw ConfigError(slot + ": rows must be arrays");
      if (r == 0)
        m.cols = static_cast<int>(j[r].size());
      else if (static_cast<int>(j[r].size()) != m.cols)
        throw ConfigError(slot + ": ragged matrix rows");
      for (int c = 0; c < m.cols; ++c)
        m.comp.push_back(CoefficientFn::from_json(
            j[r][c], allowed,
            slot + "[" + std::to_string(r) + "][" + std::to_string(c) + "]"));
    }
    if (m.cols < 1) throw ConfigError(slot + ": needs at least one column");
    return m;
  }
  if (dim != 1)
    throw ConfigError(slot + ": scalar given but dim = " + std::to_string(dim));
  m.rows = m.cols = 1;
  m.comp.push_back(CoefficientFn::from_json(j, allowed, slot));
  return m;
}

void MatrixFn::eval(const EvalPoint& p, double* out) const {
  for (size_t i = 0; i < comp.size(); ++i) out[i] = comp[i].eval(p);
}

json MatrixFn::render() const {
  if (rows == 1 && cols == 1) return comp[0].render();
  json arr = json::array();
  for (int r = 0; r < rows; ++r) {
    json row = json::array();
    for (int c = 0; c < cols; ++c) row.push_back(comp[r * cols + c].render());
    arr.push_back(row);
  }
  return arr;
}

bool MatrixFn::uses_x() const {
  for (const auto& c : comp)
    if (c.uses_x()) return true;
  return false;
}

bool MatrixFn::uses_t() const {
  for (const auto& c : comp)
    if (c.uses_t()) return true;
  return false;
}

}  // namespace qvi
