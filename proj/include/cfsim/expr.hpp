// Copyright 2026 The cfsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CFSIM_EXPR_HPP
#define CFSIM_EXPR_HPP

// Structural-equation expression language.
//
//   expression  = comparison ;
//   comparison  = additive , [ ( "<" | "<=" | ">" | ">=" | "==" | "=" | "!=" ) , additive ] ;
//   additive    = multiplicative , { ( "+" | "-" ) , multiplicative } ;
//   multiplicative = unary , { ( "*" | "/" ) , unary } ;
//   unary       = "-" , unary | power ;
//   power       = atom , [ "^" , unary ] ;
//   atom        = number | identifier | call | "(" , expression , ")" ;
//   call        = identifier , "(" , expression , { ( "," | ";" ) , expression } , ")" ;
//
// Comparisons do not chain (a < b < c is a syntax error) and yield 0.0/1.0.
// "^" is right-associative and binds tighter than unary minus, so -x^2 is
// -(x^2). Inside a variable's expression the identifier `u` always denotes
// that variable's own error term. `if(cond, a, b)` evaluates only the taken
// branch. NA (quiet NaN) propagates through every operator; genuine domain
// violations on non-NA inputs (log of a non-positive, division by zero)
// raise EvalError instead of returning NaN.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cfsim/errors.hpp"
#include "cfsim/math.hpp"

namespace cfsim {

enum class ExprKind { kLit, kVar, kNeg, kBinary, kCall, kIf };

enum class BinOp { kAdd, kSub, kMul, kDiv, kPow, kLt, kLe, kGt, kGe, kEq, kNe };

enum class Builtin {
  kExp,
  kLog,
  kAbs,
  kMin,
  kMax,
  kFloor,
  kLogistic,
  kPnorm,
  kQnorm,
  kCategorical,
  kBernoulli,
  kPoissonInv,
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable AST node. Nodes are shared freely across threads once built.
struct Expr {
  ExprKind kind;
  double lit = 0.0;               // kLit
  std::string name;               // kVar
  BinOp op = BinOp::kAdd;         // kBinary
  Builtin fn = Builtin::kExp;     // kCall
  std::vector<ExprPtr> args;      // operands / call arguments / if parts

  static ExprPtr literal(double v) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::kLit;
    e->lit = v;
    return e;
  }
  static ExprPtr var(std::string n) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::kVar;
    e->name = std::move(n);
    return e;
  }
  static ExprPtr neg(ExprPtr a) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::kNeg;
    e->args = {std::move(a)};
    return e;
  }
  static ExprPtr binary(BinOp op, ExprPtr a, ExprPtr b) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::kBinary;
    e->op = op;
    e->args = {std::move(a), std::move(b)};
    return e;
  }
  static ExprPtr call(Builtin fn, std::vector<ExprPtr> args) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::kCall;
    e->fn = fn;
    e->args = std::move(args);
    return e;
  }
  static ExprPtr if_(ExprPtr c, ExprPtr a, ExprPtr b) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::kIf;
    e->args = {std::move(c), std::move(a), std::move(b)};
    return e;
  }
};

inline const char* builtin_name(Builtin fn) {
  switch (fn) {
    case Builtin::kExp: return "exp";
    case Builtin::kLog: return "log";
    case Builtin::kAbs: return "abs";
    case Builtin::kMin: return "min";
    case Builtin::kMax: return "max";
    case Builtin::kFloor: return "floor";
    case Builtin::kLogistic: return "logistic";
    case Builtin::kPnorm: return "pnorm";
    case Builtin::kQnorm: return "qnorm";
    case Builtin::kCategorical: return "categorical";
    case Builtin::kBernoulli: return "bernoulli";
    case Builtin::kPoissonInv: return "poisson_inv";
  }
  return "?";
}

inline std::optional<Builtin> builtin_from_name(std::string_view name) {
  static const std::unordered_map<std::string_view, Builtin> table = {
      {"exp", Builtin::kExp},        {"log", Builtin::kLog},
      {"abs", Builtin::kAbs},        {"min", Builtin::kMin},
      {"max", Builtin::kMax},        {"floor", Builtin::kFloor},
      {"logistic", Builtin::kLogistic}, {"pnorm", Builtin::kPnorm},
      {"qnorm", Builtin::kQnorm},    {"categorical", Builtin::kCategorical},
      {"bernoulli", Builtin::kBernoulli}, {"poisson_inv", Builtin::kPoissonInv},
  };
  auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

/// -1 means "at least this many" (categorical takes one error plus K probs).
inline int builtin_arity(Builtin fn) {
  switch (fn) {
    case Builtin::kExp:
    case Builtin::kLog:
    case Builtin::kAbs:
    case Builtin::kFloor:
    case Builtin::kLogistic:
    case Builtin::kPnorm:
    case Builtin::kQnorm:
      return 1;
    case Builtin::kMin:
    case Builtin::kMax:
    case Builtin::kBernoulli:
    case Builtin::kPoissonInv:
      return 2;
    case Builtin::kCategorical:
      return -1;
  }
  return 0;
}

/// True for builtins whose first argument is an error term; the printer puts
/// a ';' after it, matching the declaration style used in the bundled models.
inline bool builtin_takes_error(Builtin fn) {
  return fn == Builtin::kCategorical || fn == Builtin::kBernoulli ||
         fn == Builtin::kPoissonInv;
}

// --------------------------------------------------------------------------
// Lexer / parser
// --------------------------------------------------------------------------

namespace detail {

enum class Tok {
  kNumber, kIdent, kLParen, kRParen, kSep,
  kPlus, kMinus, kStar, kSlash, kCaret,
  kLt, kLe, kGt, kGe, kEq, kNe,
  kEnd,
};

struct Token {
  Tok kind;
  size_t offset;
  std::string text;   // identifiers
  double value = 0.0; // numbers
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
    const size_t at = pos_;
    if (pos_ >= src_.size()) return {Tok::kEnd, at, "", 0.0};
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      const char* begin = src_.data() + pos_;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      pos_ += static_cast<size_t>(end - begin);
      return {Tok::kNumber, at, "", v};
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_'))
        ++pos_;
      return {Tok::kIdent, at, std::string(src_.substr(start, pos_ - start)),
              0.0};
    }
    ++pos_;
    switch (c) {
      case '(': return {Tok::kLParen, at, "", 0.0};
      case ')': return {Tok::kRParen, at, "", 0.0};
      case ',':
      case ';': return {Tok::kSep, at, "", 0.0};
      case '+': return {Tok::kPlus, at, "", 0.0};
      case '-': return {Tok::kMinus, at, "", 0.0};
      case '*': return {Tok::kStar, at, "", 0.0};
      case '/': return {Tok::kSlash, at, "", 0.0};
      case '^': return {Tok::kCaret, at, "", 0.0};
      case '<':
        if (pos_ < src_.size() && src_[pos_] == '=') {
          ++pos_;
          return {Tok::kLe, at, "", 0.0};
        }
        return {Tok::kLt, at, "", 0.0};
      case '>':
        if (pos_ < src_.size() && src_[pos_] == '=') {
          ++pos_;
          return {Tok::kGe, at, "", 0.0};
        }
        return {Tok::kGt, at, "", 0.0};
      case '=':
        if (pos_ < src_.size() && src_[pos_] == '=') ++pos_;
        return {Tok::kEq, at, "", 0.0};
      case '!':
        if (pos_ < src_.size() && src_[pos_] == '=') {
          ++pos_;
          return {Tok::kNe, at, "", 0.0};
        }
        throw ParseError("unexpected '!' (did you mean '!='?)", at);
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", at);
    }
  }

 private:
  std::string_view src_;
  size_t pos_ = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { advance(); }

  ExprPtr parse() {
    ExprPtr e = comparison();
    if (tok_.kind != Tok::kEnd) {
      throw ParseError("trailing input after expression", tok_.offset);
    }
    return e;
  }

 private:
  void advance() { tok_ = lex_.next(); }

  bool is_compare(Tok t) const {
    return t == Tok::kLt || t == Tok::kLe || t == Tok::kGt || t == Tok::kGe ||
           t == Tok::kEq || t == Tok::kNe;
  }

  ExprPtr comparison() {
    ExprPtr lhs = additive();
    if (!is_compare(tok_.kind)) return lhs;
    BinOp op;
    switch (tok_.kind) {
      case Tok::kLt: op = BinOp::kLt; break;
      case Tok::kLe: op = BinOp::kLe; break;
      case Tok::kGt: op = BinOp::kGt; break;
      case Tok::kGe: op = BinOp::kGe; break;
      case Tok::kEq: op = BinOp::kEq; break;
      default: op = BinOp::kNe; break;
    }
    advance();
    ExprPtr rhs = additive();
    if (is_compare(tok_.kind)) {
      throw ParseError("comparisons do not chain; parenthesize one side",
                       tok_.offset);
    }
    return Expr::binary(op, std::move(lhs), std::move(rhs));
  }

  ExprPtr additive() {
    ExprPtr e = multiplicative();
    while (tok_.kind == Tok::kPlus || tok_.kind == Tok::kMinus) {
      BinOp op = (tok_.kind == Tok::kPlus) ? BinOp::kAdd : BinOp::kSub;
      advance();
      e = Expr::binary(op, std::move(e), multiplicative());
    }
    return e;
  }

  ExprPtr multiplicative() {
    ExprPtr e = unary();
    while (tok_.kind == Tok::kStar || tok_.kind == Tok::kSlash) {
      BinOp op = (tok_.kind == Tok::kStar) ? BinOp::kMul : BinOp::kDiv;
      advance();
      e = Expr::binary(op, std::move(e), unary());
    }
    return e;
  }

  ExprPtr unary() {
    if (tok_.kind == Tok::kMinus) {
      advance();
      ExprPtr inner = unary();
      // Fold a negated literal so "-1" and the printed form of Lit(-1) parse
      // to identical trees.
      if (inner->kind == ExprKind::kLit) return Expr::literal(-inner->lit);
      return Expr::neg(std::move(inner));
    }
    return power();
  }

  ExprPtr power() {
    ExprPtr base = atom();
    if (tok_.kind == Tok::kCaret) {
      advance();
      return Expr::binary(BinOp::kPow, std::move(base), unary());
    }
    return base;
  }

  ExprPtr atom() {
    if (tok_.kind == Tok::kNumber) {
      double v = tok_.value;
      advance();
      return Expr::literal(v);
    }
    if (tok_.kind == Tok::kLParen) {
      advance();
      ExprPtr e = comparison();
      expect(Tok::kRParen, "')'");
      return e;
    }
    if (tok_.kind == Tok::kIdent) {
      std::string name = tok_.text;
      size_t at = tok_.offset;
      advance();
      if (tok_.kind != Tok::kLParen) return Expr::var(std::move(name));
      advance();
      std::vector<ExprPtr> args;
      args.push_back(comparison());
      while (tok_.kind == Tok::kSep) {
        advance();
        args.push_back(comparison());
      }
      expect(Tok::kRParen, "')'");
      if (name == "if") {
        if (args.size() != 3) {
          throw ParseError("if() takes 3 arguments, got " +
                               std::to_string(args.size()),
                           at);
        }
        return Expr::if_(args[0], args[1], args[2]);
      }
      auto fn = builtin_from_name(name);
      if (!fn) throw ParseError("unknown function '" + name + "'", at);
      int arity = builtin_arity(*fn);
      if (arity >= 0 && static_cast<int>(args.size()) != arity) {
        throw ParseError(name + "() takes " + std::to_string(arity) +
                             " arguments, got " + std::to_string(args.size()),
                         at);
      }
      if (arity < 0 && args.size() < 2) {
        throw ParseError(name + "() needs an error argument and at least one "
                             "probability",
                         at);
      }
      return Expr::call(*fn, std::move(args));
    }
    throw ParseError("expected a number, name, or '('", tok_.offset);
  }

  void expect(Tok kind, const char* what) {
    if (tok_.kind != kind) {
      throw ParseError(std::string("expected ") + what, tok_.offset);
    }
    advance();
  }

  Lexer lex_;
  Token tok_{Tok::kEnd, 0, "", 0.0};
};

}  // namespace detail

inline ExprPtr parse_expr(std::string_view source) {
  return detail::Parser(source).parse();
}

// --------------------------------------------------------------------------
// Printer
// --------------------------------------------------------------------------

namespace detail {

// Precedence levels: comparison 1, additive 2, multiplicative 3, unary 4,
// power 5, atom 6.
inline int node_prec(const Expr& e) {
  switch (e.kind) {
    case ExprKind::kBinary:
      switch (e.op) {
        case BinOp::kAdd:
        case BinOp::kSub: return 2;
        case BinOp::kMul:
        case BinOp::kDiv: return 3;
        case BinOp::kPow: return 5;
        default: return 1;
      }
    case ExprKind::kNeg: return 4;
    case ExprKind::kLit: return (e.lit < 0.0) ? 4 : 6;
    default: return 6;
  }
}

inline const char* binop_text(BinOp op) {
  switch (op) {
    case BinOp::kAdd: return " + ";
    case BinOp::kSub: return " - ";
    case BinOp::kMul: return " * ";
    case BinOp::kDiv: return " / ";
    case BinOp::kPow: return "^";
    case BinOp::kLt: return " < ";
    case BinOp::kLe: return " <= ";
    case BinOp::kGt: return " > ";
    case BinOp::kGe: return " >= ";
    case BinOp::kEq: return " == ";
    case BinOp::kNe: return " != ";
  }
  return "?";
}

inline void print_rec(const Expr& e, int min_prec, std::string& out) {
  const bool parens = node_prec(e) < min_prec;
  if (parens) out += '(';
  switch (e.kind) {
    case ExprKind::kLit:
      out += format_double(e.lit);
      break;
    case ExprKind::kVar:
      out += e.name;
      break;
    case ExprKind::kNeg:
      out += '-';
      print_rec(*e.args[0], 4, out);
      break;
    case ExprKind::kBinary: {
      int p = node_prec(e);
      if (e.op == BinOp::kPow) {
        // Left operand of ^ must be an atom; the exponent re-enters at the
        // unary level, keeping right-associativity on reparse.
        print_rec(*e.args[0], 6, out);
        out += '^';
        print_rec(*e.args[1], 4, out);
      } else {
        print_rec(*e.args[0], p, out);
        out += binop_text(e.op);
        print_rec(*e.args[1], p + 1, out);
      }
      break;
    }
    case ExprKind::kCall: {
      out += builtin_name(e.fn);
      out += '(';
      for (size_t i = 0; i < e.args.size(); ++i) {
        if (i > 0) out += (i == 1 && builtin_takes_error(e.fn)) ? "; " : ", ";
        print_rec(*e.args[i], 1, out);
      }
      out += ')';
      break;
    }
    case ExprKind::kIf: {
      out += "if(";
      print_rec(*e.args[0], 1, out);
      out += ", ";
      print_rec(*e.args[1], 1, out);
      out += ", ";
      print_rec(*e.args[2], 1, out);
      out += ')';
      break;
    }
  }
  if (parens) out += ')';
}

}  // namespace detail

inline std::string print_expr(const Expr& e) {
  std::string out;
  detail::print_rec(e, 1, out);
  return out;
}

inline std::string print_expr(const ExprPtr& e) { return print_expr(*e); }

// --------------------------------------------------------------------------
// Structural queries
// --------------------------------------------------------------------------

inline void collect_vars(const Expr& e, std::set<std::string>& out) {
  if (e.kind == ExprKind::kVar) out.insert(e.name);
  for (const auto& a : e.args) collect_vars(*a, out);
}

inline std::set<std::string> free_vars(const Expr& e) {
  std::set<std::string> out;
  collect_vars(e, out);
  return out;
}

inline std::set<std::string> free_vars(const ExprPtr& e) {
  return free_vars(*e);
}

inline bool uses_symbol(const Expr& e, std::string_view name) {
  if (e.kind == ExprKind::kVar && e.name == name) return true;
  for (const auto& a : e.args) {
    if (uses_symbol(*a, name)) return true;
  }
  return false;
}

/// Syntactic check for the shape g(parents) + u (in any association order),
/// with `u` absent from g. Conservative: anything else is rejected, even if
/// mathematically additive.
inline bool is_additive_in_error(const Expr& e,
                                 std::string_view error_symbol = "u") {
  if (e.kind == ExprKind::kVar && e.name == error_symbol) return true;
  if (e.kind == ExprKind::kBinary && e.op == BinOp::kAdd) {
    if (is_additive_in_error(*e.args[0], error_symbol) &&
        !uses_symbol(*e.args[1], error_symbol))
      return true;
    if (is_additive_in_error(*e.args[1], error_symbol) &&
        !uses_symbol(*e.args[0], error_symbol))
      return true;
    return false;
  }
  if (e.kind == ExprKind::kBinary && e.op == BinOp::kSub) {
    return is_additive_in_error(*e.args[0], error_symbol) &&
           !uses_symbol(*e.args[1], error_symbol);
  }
  return false;
}

inline bool is_additive_in_error(const ExprPtr& e,
                                 std::string_view error_symbol = "u") {
  return is_additive_in_error(*e, error_symbol);
}

// --------------------------------------------------------------------------
// Evaluation
// --------------------------------------------------------------------------

namespace detail {

inline double apply_binop(BinOp op, double a, double b) {
  if (is_na(a) || is_na(b)) return kNa;
  switch (op) {
    case BinOp::kAdd: return a + b;
    case BinOp::kSub: return a - b;
    case BinOp::kMul: return a * b;
    case BinOp::kDiv:
      if (b == 0.0) throw EvalError("division by zero");
      return a / b;
    case BinOp::kPow: {
      double r = std::pow(a, b);
      if (std::isnan(r)) {
        throw EvalError("domain error: " + format_double(a) + "^" +
                        format_double(b));
      }
      return r;
    }
    case BinOp::kLt: return a < b ? 1.0 : 0.0;
    case BinOp::kLe: return a <= b ? 1.0 : 0.0;
    case BinOp::kGt: return a > b ? 1.0 : 0.0;
    case BinOp::kGe: return a >= b ? 1.0 : 0.0;
    case BinOp::kEq: return a == b ? 1.0 : 0.0;
    case BinOp::kNe: return a != b ? 1.0 : 0.0;
  }
  return kNa;
}

inline double apply_unary_builtin(Builtin fn, double x) {
  if (is_na(x)) return kNa;
  switch (fn) {
    case Builtin::kExp: return std::exp(x);
    case Builtin::kLog:
      if (x <= 0.0) {
        throw EvalError("log of non-positive value " + format_double(x));
      }
      return std::log(x);
    case Builtin::kAbs: return std::fabs(x);
    case Builtin::kFloor: return std::floor(x);
    case Builtin::kLogistic: return logistic(x);
    case Builtin::kPnorm: return norm_cdf(x);
    case Builtin::kQnorm: return norm_quantile(x);
    default: break;
  }
  throw EvalError("internal: bad unary builtin");
}

/// categorical over classes 1..K: returns k iff sum_{j<k} p_j <= u <
/// sum_{j<=k} p_j. Probabilities must sum to 1 within 1e-9.
inline double apply_categorical(double u, const double* p, size_t k_count) {
  if (is_na(u)) return kNa;
  double total = 0.0;
  for (size_t j = 0; j < k_count; ++j) {
    if (is_na(p[j])) return kNa;
    if (p[j] < 0.0) {
      throw EvalError("categorical: negative probability " +
                      format_double(p[j]));
    }
    total += p[j];
  }
  if (std::fabs(total - 1.0) > 1e-9) {
    throw EvalError("categorical: probabilities sum to " +
                    format_double(total) + ", need 1 within 1e-9");
  }
  if (u < 0.0 || u > 1.0) {
    throw EvalError("categorical: error argument " + format_double(u) +
                    " outside [0, 1]");
  }
  double cum = 0.0;
  for (size_t j = 0; j < k_count; ++j) {
    cum += p[j];
    if (u < cum) return static_cast<double>(j + 1);
  }
  return static_cast<double>(k_count);
}

inline double apply_bernoulli(double u, double p) {
  if (is_na(u) || is_na(p)) return kNa;
  if (p < 0.0 || p > 1.0) {
    throw EvalError("bernoulli: probability " + format_double(p) +
                    " outside [0, 1]");
  }
  if (u < 0.0 || u > 1.0) {
    throw EvalError("bernoulli: error argument " + format_double(u) +
                    " outside [0, 1]");
  }
  return (u >= 1.0 - p) ? 1.0 : 0.0;
}

inline double apply_min_max(Builtin fn, double a, double b) {
  if (is_na(a) || is_na(b)) return kNa;
  return (fn == Builtin::kMin) ? (a < b ? a : b) : (a > b ? a : b);
}

}  // namespace detail

/// Tree-walking evaluation against a name -> value environment. The table
/// pipelines use CompiledExpr below; this entry point serves scalar call
/// sites (root finding residuals go through CompiledExpr too).
inline double eval_expr(const Expr& e,
                        const std::unordered_map<std::string, double>& env) {
  switch (e.kind) {
    case ExprKind::kLit:
      return e.lit;
    case ExprKind::kVar: {
      auto it = env.find(e.name);
      if (it == env.end()) throw EvalError("unbound variable '" + e.name + "'");
      return it->second;
    }
    case ExprKind::kNeg: {
      double v = eval_expr(*e.args[0], env);
      return is_na(v) ? kNa : -v;
    }
    case ExprKind::kBinary:
      return detail::apply_binop(e.op, eval_expr(*e.args[0], env),
                                 eval_expr(*e.args[1], env));
    case ExprKind::kIf: {
      double c = eval_expr(*e.args[0], env);
      if (is_na(c)) return kNa;
      return eval_expr(*(c != 0.0 ? e.args[1] : e.args[2]), env);
    }
    case ExprKind::kCall: {
      switch (e.fn) {
        case Builtin::kMin:
        case Builtin::kMax:
          return detail::apply_min_max(e.fn, eval_expr(*e.args[0], env),
                                       eval_expr(*e.args[1], env));
        case Builtin::kBernoulli:
          return detail::apply_bernoulli(eval_expr(*e.args[0], env),
                                         eval_expr(*e.args[1], env));
        case Builtin::kPoissonInv: {
          double u = eval_expr(*e.args[0], env);
          double lambda = eval_expr(*e.args[1], env);
          if (is_na(u) || is_na(lambda)) return kNa;
          return poisson_inv(u, lambda);
        }
        case Builtin::kCategorical: {
          double u = eval_expr(*e.args[0], env);
          std::vector<double> p(e.args.size() - 1);
          for (size_t i = 1; i < e.args.size(); ++i) {
            p[i - 1] = eval_expr(*e.args[i], env);
          }
          return detail::apply_categorical(u, p.data(), p.size());
        }
        default:
          return detail::apply_unary_builtin(e.fn,
                                             eval_expr(*e.args[0], env));
      }
    }
  }
  throw EvalError("internal: bad expression node");
}

inline double eval_expr(const ExprPtr& e,
                        const std::unordered_map<std::string, double>& env) {
  return eval_expr(*e, env);
}

// --------------------------------------------------------------------------
// Compiled form
// --------------------------------------------------------------------------

/// Postfix program with variables resolved to column indices, for the
/// row-at-a-time loops over particle tables. Produces bit-identical results
/// to eval_expr (same operations in the same order).
class CompiledExpr {
 public:
  CompiledExpr() = default;

  /// `columns` maps every free variable of `e` (including the error symbol
  /// `u` when present) to an index into the column array passed to eval_row.
  static CompiledExpr compile(
      const Expr& e, const std::unordered_map<std::string, int>& columns) {
    CompiledExpr c;
    c.emit(e, columns);
    int depth = 0;
    int peak = 0;
    for (const auto& ins : c.code_) {
      depth += stack_delta(ins.op);
      if (depth > peak) peak = depth;
    }
    c.max_stack_ = peak;
    if (peak > kStackCap) {
      throw ModelError("expression too deeply nested (stack " +
                       std::to_string(peak) + ", cap " +
                       std::to_string(kStackCap) + ")");
    }
    return c;
  }

  /// `cols[i]` is a pointer to column i's data; evaluates at `row`.
  double eval_row(const double* const* cols, size_t row) const {
    double stack[kStackCap];
    int top = -1;
    size_t ip = 0;
    while (ip < code_.size()) {
      const Instr& ins = code_[ip];
      switch (ins.op) {
        case OpCode::kPushLit:
          stack[++top] = ins.c;
          break;
        case OpCode::kPushCol:
          stack[++top] = cols[ins.a][row];
          break;
        case OpCode::kNeg: {
          double& v = stack[top];
          v = is_na(v) ? kNa : -v;
          break;
        }
        case OpCode::kBin: {
          double b = stack[top--];
          stack[top] = detail::apply_binop(static_cast<BinOp>(ins.a),
                                           stack[top], b);
          break;
        }
        case OpCode::kMinMax: {
          double b = stack[top--];
          stack[top] = detail::apply_min_max(static_cast<Builtin>(ins.a),
                                             stack[top], b);
          break;
        }
        case OpCode::kUnaryFn:
          stack[top] = detail::apply_unary_builtin(static_cast<Builtin>(ins.a),
                                                   stack[top]);
          break;
        case OpCode::kBernoulli: {
          double p = stack[top--];
          stack[top] = detail::apply_bernoulli(stack[top], p);
          break;
        }
        case OpCode::kPoissonInv: {
          double lambda = stack[top--];
          double u = stack[top];
          stack[top] = (is_na(u) || is_na(lambda)) ? kNa
                                                   : poisson_inv(u, lambda);
          break;
        }
        case OpCode::kCategorical: {
          int k_count = ins.a;
          top -= k_count;
          stack[top] = detail::apply_categorical(stack[top], &stack[top + 1],
                                                 static_cast<size_t>(k_count));
          break;
        }
        case OpCode::kBranch: {
          double c = stack[top--];
          if (is_na(c)) {
            stack[++top] = kNa;
            ip = static_cast<size_t>(ins.b);
            continue;
          }
          if (c == 0.0) {
            ip = static_cast<size_t>(ins.a);
            continue;
          }
          break;
        }
        case OpCode::kJump:
          ip = static_cast<size_t>(ins.a);
          continue;
      }
      ++ip;
    }
    return stack[0];
  }

  int max_stack() const { return max_stack_; }

 private:
  static constexpr int kStackCap = 64;

  enum class OpCode : std::uint8_t {
    kPushLit, kPushCol, kNeg, kBin, kMinMax, kUnaryFn,
    kBernoulli, kPoissonInv, kCategorical, kBranch, kJump,
  };

  struct Instr {
    OpCode op;
    int a = 0;      // column index / op id / jump target / K
    int b = 0;      // kBranch: end target
    double c = 0.0; // kPushLit
  };

  static int stack_delta(OpCode op) {
    switch (op) {
      case OpCode::kPushLit:
      case OpCode::kPushCol: return 1;
      case OpCode::kNeg:
      case OpCode::kUnaryFn:
      case OpCode::kJump: return 0;
      case OpCode::kCategorical: return 0;  // conservative; real delta is -K
      default: return -1;
    }
  }

  void emit(const Expr& e, const std::unordered_map<std::string, int>& cols) {
    switch (e.kind) {
      case ExprKind::kLit:
        code_.push_back({OpCode::kPushLit, 0, 0, e.lit});
        break;
      case ExprKind::kVar: {
        auto it = cols.find(e.name);
        if (it == cols.end()) {
          throw ModelError("variable '" + e.name +
                           "' has no column in this table");
        }
        code_.push_back({OpCode::kPushCol, it->second, 0, 0.0});
        break;
      }
      case ExprKind::kNeg:
        emit(*e.args[0], cols);
        code_.push_back({OpCode::kNeg, 0, 0, 0.0});
        break;
      case ExprKind::kBinary:
        emit(*e.args[0], cols);
        emit(*e.args[1], cols);
        code_.push_back({OpCode::kBin, static_cast<int>(e.op), 0, 0.0});
        break;
      case ExprKind::kIf: {
        emit(*e.args[0], cols);
        size_t branch_at = code_.size();
        code_.push_back({OpCode::kBranch, 0, 0, 0.0});
        emit(*e.args[1], cols);
        size_t jump_at = code_.size();
        code_.push_back({OpCode::kJump, 0, 0, 0.0});
        code_[branch_at].a = static_cast<int>(code_.size());
        emit(*e.args[2], cols);
        code_[jump_at].a = static_cast<int>(code_.size());
        code_[branch_at].b = static_cast<int>(code_.size());
        break;
      }
      case ExprKind::kCall: {
        for (const auto& a : e.args) emit(*a, cols);
        switch (e.fn) {
          case Builtin::kMin:
          case Builtin::kMax:
            code_.push_back({OpCode::kMinMax, static_cast<int>(e.fn), 0, 0.0});
            break;
          case Builtin::kBernoulli:
            code_.push_back({OpCode::kBernoulli, 0, 0, 0.0});
            break;
          case Builtin::kPoissonInv:
            code_.push_back({OpCode::kPoissonInv, 0, 0, 0.0});
            break;
          case Builtin::kCategorical:
            code_.push_back({OpCode::kCategorical,
                             static_cast<int>(e.args.size()) - 1, 0, 0.0});
            break;
          default:
            code_.push_back({OpCode::kUnaryFn, static_cast<int>(e.fn), 0, 0.0});
            break;
        }
        break;
      }
    }
  }

  std::vector<Instr> code_;
  int max_stack_ = 0;
};

}  // namespace cfsim

#endif  // CFSIM_EXPR_HPP
