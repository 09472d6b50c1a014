#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qvi/errors.hpp"
#include "qvi/expr.hpp"

namespace qvi {

/// One scalar model coefficient.  In config JSON it is a number, an
/// expression string, or a named builtin object:
///   {"type": "constant", "value": v}
///   {"type": "affine",    "c0": v, "c": [...]}          (in x or xi)
///   {"type": "quadratic", "c0": v, "c": [...], "Q": [[...]]}
///   {"type": "table",     "var": "t"|"s"|"x[i]"|"xi[i]", "points": [[v,y],...]}
/// Builtins other than table compile down to the expression engine; render()
/// re-emits the original JSON so parse/render round-trips are exact.
class CoefficientFn {
 public:
  CoefficientFn() = default;

  static CoefficientFn from_json(const nlohmann::ordered_json& j,
                                 const SymbolSet& allowed,
                                 const std::string& slot);
  static CoefficientFn from_expression(const std::string& src,
                                       const SymbolSet& allowed);

  double eval(const EvalPoint& p) const;

  bool uses_x() const;
  bool uses_t() const;
  bool uses_xi() const;
  bool is_constant() const;

  nlohmann::ordered_json render() const { return original_; }

 private:
  enum class Kind { Expression, Table } kind_ = Kind::Expression;
  Expr expr_;
  // Piecewise-linear table in one variable, clamped outside the knot range.
  char table_var_ = 't';
  int table_index_ = 0;
  std::vector<double> table_x_, table_y_;
  nlohmann::ordered_json original_;
};

/// Vector-valued coefficient (drift, atom size).  A bare scalar entry is
/// accepted for dim == 1.
struct VectorFn {
  std::vector<CoefficientFn> comp;

  static VectorFn from_json(const nlohmann::ordered_json& j, int dim,
                            const SymbolSet& allowed, const std::string& slot);
  void eval(const EvalPoint& p, double* out) const;
  nlohmann::ordered_json render() const;
};

/// Matrix-valued coefficient (diffusion sigma, n rows, m columns).
struct MatrixFn {
  int rows = 0, cols = 0;
  std::vector<CoefficientFn> comp;  // row-major

  static MatrixFn from_json(const nlohmann::ordered_json& j, int dim,
                            const SymbolSet& allowed, const std::string& slot);
  void eval(const EvalPoint& p, double* out) const;  // row-major rows*cols
  nlohmann::ordered_json render() const;
  bool uses_x() const;
  bool uses_t() const;
};

}  // namespace qvi
