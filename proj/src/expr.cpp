#include "qvi/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>

namespace qvi {

namespace {

enum class TokKind { Num, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, LBracket, RBracket, Comma, End };

struct Token {
  TokKind kind;
  double num = 0.0;
  std::string ident;
  int col = 0;
};

struct Lexer {
  const std::string& s;
  size_t pos = 0;

  explicit Lexer(const std::string& src) : s(src) {}

  [[noreturn]] void fail(const std::string& msg, size_t at) const {
    throw ExprError(msg, static_cast<int>(at) + 1);
  }

  Token next() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    Token tok;
    tok.col = static_cast<int>(pos) + 1;
    if (pos >= s.size()) {
      tok.kind = TokKind::End;
      return tok;
    }
    char c = s[pos];
    switch (c) {
      case '+': ++pos; tok.kind = TokKind::Plus; return tok;
      case '-': ++pos; tok.kind = TokKind::Minus; return tok;
      case '*': ++pos; tok.kind = TokKind::Star; return tok;
      case '/': ++pos; tok.kind = TokKind::Slash; return tok;
      case '^': ++pos; tok.kind = TokKind::Caret; return tok;
      case '(': ++pos; tok.kind = TokKind::LParen; return tok;
      case ')': ++pos; tok.kind = TokKind::RParen; return tok;
      case '[': ++pos; tok.kind = TokKind::LBracket; return tok;
      case ']': ++pos; tok.kind = TokKind::RBracket; return tok;
      case ',': ++pos; tok.kind = TokKind::Comma; return tok;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s.c_str() + pos;
      char* end = nullptr;
      tok.num = std::strtod(begin, &end);
      if (end == begin) fail("malformed number", pos);
      pos += static_cast<size_t>(end - begin);
      tok.kind = TokKind::Num;
      return tok;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos;
      while (pos < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
        ++pos;
      tok.kind = TokKind::Ident;
      tok.ident = s.substr(start, pos - start);
      return tok;
    }
    fail(std::string("unexpected character '") + c + "'", pos);
  }
};

struct Node {
  // Leaf ops reuse Expr's instruction encoding; Call covers unary/binary fns.
  enum class Kind { Const, Sym, Unary, Binary, Call } kind;
  double value = 0.0;
  char sym = 0;          // 'x', 't', 'i' (xi), 's'
  int index = 0;         // x[index] / xi[index]
  char op = 0;           // + - * / ^ and 'n' for negate
  std::string fn;
  std::unique_ptr<Node> a, b;
};

using NodePtr = std::unique_ptr<Node>;

NodePtr make_const(double v) {
  auto n = std::make_unique<Node>();
  n->kind = Node::Kind::Const;
  n->value = v;
  return n;
}

}  // namespace

class ExprParser {
 public:
  ExprParser(const std::string& src, const SymbolSet& allowed)
      : lex_(src), allowed_(allowed), src_(src) {
    advance();
  }

  Expr parse() {
    NodePtr root = expression();
    if (cur_.kind != TokKind::End)
      throw ExprError("unexpected trailing input", cur_.col);
    fold(root);
    Expr e;
    e.src_ = src_;
    int depth = 0;
    emit(e, *root, depth);
    return e;
  }

 private:
  Lexer lex_;
  Token cur_;
  SymbolSet allowed_;
  std::string src_;

  void advance() { cur_ = lex_.next(); }

  bool accept(TokKind k) {
    if (cur_.kind == k) {
      advance();
      return true;
    }
    return false;
  }

  void expect(TokKind k, const char* what) {
    if (cur_.kind != k) throw ExprError(std::string("expected ") + what, cur_.col);
    advance();
  }

  NodePtr expression() {
    NodePtr lhs = term();
    for (;;) {
      if (cur_.kind == TokKind::Plus || cur_.kind == TokKind::Minus) {
        char op = cur_.kind == TokKind::Plus ? '+' : '-';
        advance();
        NodePtr rhs = term();
        auto n = std::make_unique<Node>();
        n->kind = Node::Kind::Binary;
        n->op = op;
        n->a = std::move(lhs);
        n->b = std::move(rhs);
        lhs = std::move(n);
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (cur_.kind == TokKind::Star || cur_.kind == TokKind::Slash) {
        char op = cur_.kind == TokKind::Star ? '*' : '/';
        advance();
        NodePtr rhs = unary();
        auto n = std::make_unique<Node>();
        n->kind = Node::Kind::Binary;
        n->op = op;
        n->a = std::move(lhs);
        n->b = std::move(rhs);
        lhs = std::move(n);
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept(TokKind::Minus)) {
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::Unary;
      n->op = 'n';
      n->a = unary();
      return n;
    }
    accept(TokKind::Plus);
    return power();
  }

  // Exponentiation binds tighter than unary minus and associates right:
  // -x^2 == -(x^2), 2^3^2 == 2^(3^2).
  NodePtr power() {
    NodePtr base = primary();
    if (accept(TokKind::Caret)) {
      NodePtr exp = unary();
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::Binary;
      n->op = '^';
      n->a = std::move(base);
      n->b = std::move(exp);
      return n;
    }
    return base;
  }

  NodePtr primary() {
    if (cur_.kind == TokKind::Num) {
      double v = cur_.num;
      advance();
      return make_const(v);
    }
    if (accept(TokKind::LParen)) {
      NodePtr inner = expression();
      expect(TokKind::RParen, "')'");
      return inner;
    }
    if (cur_.kind == TokKind::Ident) {
      std::string name = cur_.ident;
      int col = cur_.col;
      advance();
      if (cur_.kind == TokKind::LParen) return call(name, col);
      return symbol(name, col);
    }
    throw ExprError("expected expression", cur_.col);
  }

  NodePtr call(const std::string& name, int col) {
    static const char* unary_fns[] = {"exp", "log", "abs", "sqrt"};
    static const char* binary_fns[] = {"min", "max", "pow"};
    bool is_unary = false, is_binary = false;
    for (auto* f : unary_fns) is_unary |= name == f;
    for (auto* f : binary_fns) is_binary |= name == f;
    if (!is_unary && !is_binary)
      throw ExprError("unknown function '" + name + "'", col);
    expect(TokKind::LParen, "'('");
    auto n = std::make_unique<Node>();
    n->kind = Node::Kind::Call;
    n->fn = name;
    n->a = expression();
    if (is_binary) {
      expect(TokKind::Comma, "','");
      n->b = expression();
    }
    expect(TokKind::RParen, "')'");
    return n;
  }

  NodePtr symbol(const std::string& name, int col) {
    auto n = std::make_unique<Node>();
    n->kind = Node::Kind::Sym;
    if (name == "t") {
      if (!allowed_.t) throw ExprError("symbol 't' not allowed here", col);
      n->sym = 't';
      return n;
    }
    if (name == "s") {
      if (!allowed_.s) throw ExprError("symbol 's' not allowed here", col);
      n->sym = 's';
      return n;
    }
    if (name == "x" || name == "xi") {
      bool is_xi = name == "xi";
      if (is_xi ? !allowed_.xi : !allowed_.x)
        throw ExprError("symbol '" + name + "' not allowed here", col);
      expect(TokKind::LBracket, "'['");
      if (cur_.kind != TokKind::Num)
        throw ExprError("expected index", cur_.col);
      double idxv = cur_.num;
      int idx = static_cast<int>(idxv);
      if (idx < 0 || static_cast<double>(idx) != idxv)
        throw ExprError("index must be a nonnegative integer", cur_.col);
      if (idx >= allowed_.dim)
        throw ExprError(name + "[" + std::to_string(idx) + "] out of range for dim " +
                            std::to_string(allowed_.dim),
                        cur_.col);
      advance();
      expect(TokKind::RBracket, "']'");
      n->sym = is_xi ? 'i' : 'x';
      n->index = idx;
      return n;
    }
    throw ExprError("unknown symbol '" + name + "'", col);
  }

  static double apply_fn(const std::string& fn, double a, double b) {
    if (fn == "exp") return std::exp(a);
    if (fn == "log") return std::log(a);
    if (fn == "abs") return std::fabs(a);
    if (fn == "sqrt") return std::sqrt(a);
    if (fn == "min") return std::fmin(a, b);
    if (fn == "max") return std::fmax(a, b);
    return std::pow(a, b);  // pow
  }

  // Bottom-up constant folding; leaves non-constant structure untouched.
  static void fold(NodePtr& n) {
    switch (n->kind) {
      case Node::Kind::Const:
      case Node::Kind::Sym:
        return;
      case Node::Kind::Unary:
        fold(n->a);
        if (n->a->kind == Node::Kind::Const) n = make_const(-n->a->value);
        return;
      case Node::Kind::Binary: {
        fold(n->a);
        fold(n->b);
        if (n->a->kind == Node::Kind::Const && n->b->kind == Node::Kind::Const) {
          double a = n->a->value, b = n->b->value, v = 0.0;
          switch (n->op) {
            case '+': v = a + b; break;
            case '-': v = a - b; break;
            case '*': v = a * b; break;
            case '/': v = a / b; break;
            case '^': v = std::pow(a, b); break;
          }
          n = make_const(v);
        }
        return;
      }
      case Node::Kind::Call: {
        fold(n->a);
        if (n->b) fold(n->b);
        bool const_args = n->a->kind == Node::Kind::Const &&
                          (!n->b || n->b->kind == Node::Kind::Const);
        if (const_args)
          n = make_const(apply_fn(n->fn, n->a->value, n->b ? n->b->value : 0.0));
        return;
      }
    }
  }

  void emit(Expr& e, const Node& n, int& depth) {
    using Op = Expr::Op;
    auto push = [&](Expr::Instr ins, int stack_delta) {
      e.tape_.push_back(ins);
      depth += stack_delta;
      if (depth > e.max_stack_) e.max_stack_ = depth;
    };
    switch (n.kind) {
      case Node::Kind::Const:
        push({Op::Const, 0, n.value}, +1);
        return;
      case Node::Kind::Sym:
        switch (n.sym) {
          case 'x': e.uses_x_ = true; push({Op::LoadX, n.index, 0.0}, +1); return;
          case 't': e.uses_t_ = true; push({Op::LoadT, 0, 0.0}, +1); return;
          case 'i': e.uses_xi_ = true; push({Op::LoadXi, n.index, 0.0}, +1); return;
          case 's': e.uses_s_ = true; push({Op::LoadS, 0, 0.0}, +1); return;
        }
        return;
      case Node::Kind::Unary:
        emit(e, *n.a, depth);
        push({Op::Neg, 0, 0.0}, 0);
        return;
      case Node::Kind::Binary: {
        emit(e, *n.a, depth);
        emit(e, *n.b, depth);
        Op op = Op::Add;
        switch (n.op) {
          case '+': op = Op::Add; break;
          case '-': op = Op::Sub; break;
          case '*': op = Op::Mul; break;
          case '/': op = Op::Div; break;
          case '^': op = Op::Pow; break;
        }
        push({op, 0, 0.0}, -1);
        return;
      }
      case Node::Kind::Call: {
        emit(e, *n.a, depth);
        if (n.b) emit(e, *n.b, depth);
        if (n.fn == "exp") push({Op::Exp, 0, 0.0}, 0);
        else if (n.fn == "log") push({Op::Log, 0, 0.0}, 0);
        else if (n.fn == "abs") push({Op::Abs, 0, 0.0}, 0);
        else if (n.fn == "sqrt") push({Op::Sqrt, 0, 0.0}, 0);
        else if (n.fn == "min") push({Op::Min, 0, 0.0}, -1);
        else if (n.fn == "max") push({Op::Max, 0, 0.0}, -1);
        else push({Op::Pow, 0, 0.0}, -1);  // pow(a, b)
        return;
      }
    }
  }
};

Expr Expr::compile(const std::string& source, const SymbolSet& allowed) {
  if (source.empty()) throw ExprError("empty expression", 1);
  ExprParser p(source, allowed);
  Expr e = p.parse();
  if (e.max_stack_ > 64) throw ExprError("expression too deeply nested", 1);
  return e;
}

double Expr::eval(const EvalPoint& p) const {
  double stack[64];
  int sp = 0;
  for (const Instr& ins : tape_) {
    switch (ins.op) {
      case Op::Const: stack[sp++] = ins.c; break;
      case Op::LoadX: stack[sp++] = p.x[ins.idx]; break;
      case Op::LoadT: stack[sp++] = p.t; break;
      case Op::LoadXi: stack[sp++] = p.xi[ins.idx]; break;
      case Op::LoadS: stack[sp++] = p.s; break;
      case Op::Add: --sp; stack[sp - 1] += stack[sp]; break;
      case Op::Sub: --sp; stack[sp - 1] -= stack[sp]; break;
      case Op::Mul: --sp; stack[sp - 1] *= stack[sp]; break;
      case Op::Div: --sp; stack[sp - 1] /= stack[sp]; break;
      case Op::Pow: --sp; stack[sp - 1] = std::pow(stack[sp - 1], stack[sp]); break;
      case Op::Neg: stack[sp - 1] = -stack[sp - 1]; break;
      case Op::Exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
      case Op::Log: stack[sp - 1] = std::log(stack[sp - 1]); break;
      case Op::Abs: stack[sp - 1] = std::fabs(stack[sp - 1]); break;
      case Op::Sqrt: stack[sp - 1] = std::sqrt(stack[sp - 1]); break;
      case Op::Min: --sp; stack[sp - 1] = std::fmin(stack[sp - 1], stack[sp]); break;
      case Op::Max: --sp; stack[sp - 1] = std::fmax(stack[sp - 1], stack[sp]); break;
    }
  }
  return stack[0];
}

}  // namespace qvi
