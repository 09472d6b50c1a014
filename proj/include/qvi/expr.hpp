#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qvi {

/// Error with 1-based column position into the offending expression source.
struct ExprError : std::runtime_error {
  ExprError(const std::string& msg, int column)
      : std::runtime_error(msg), col(column) {}
  int col;
};

/// Which symbols an expression slot may reference.  `dim` bounds x[i]/xi[i]
/// indices; a negative flag forbids the symbol family entirely.
struct SymbolSet {
  int dim = 1;
  bool x = false;
  bool t = false;
  bool xi = false;
  bool s = false;
};

/// Evaluation point.  Pointers may be null when the matching symbol family is
/// disallowed for the compiled expression.
struct EvalPoint {
  const double* x = nullptr;
  double t = 0.0;
  const double* xi = nullptr;
  double s = 0.0;
};

/// A compiled arithmetic expression over x[0..n-1], t, xi[0..n-1], s with
/// + - * / ^, unary minus and exp, log, abs, sqrt, min, max, pow.
/// Compilation folds constant subtrees; evaluation runs a flat postfix tape
/// with a fixed-size stack, cheap enough for Monte Carlo inner loops.
class Expr {
 public:
  Expr() = default;

  static Expr compile(const std::string& source, const SymbolSet& allowed);

  double eval(const EvalPoint& p) const;

  bool uses_x() const { return uses_x_; }
  bool uses_t() const { return uses_t_; }
  bool uses_xi() const { return uses_xi_; }
  bool uses_s() const { return uses_s_; }
  bool is_constant() const { return !(uses_x_ || uses_t_ || uses_xi_ || uses_s_); }

  const std::string& source() const { return src_; }

 private:
  enum class Op : uint8_t {
    Const, LoadX, LoadT, LoadXi, LoadS,
    Add, Sub, Mul, Div, Pow, Neg,
    Exp, Log, Abs, Sqrt, Min, Max,
  };
  struct Instr {
    Op op;
    int32_t idx = 0;
    double c = 0.0;
  };

  std::vector<Instr> tape_;
  int max_stack_ = 0;
  bool uses_x_ = false, uses_t_ = false, uses_xi_ = false, uses_s_ = false;
  std::string src_;

  friend class ExprParser;
};

}  // namespace qvi
