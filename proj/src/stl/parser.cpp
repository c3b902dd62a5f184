#include "quadsim/stl/parser.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <vector>

namespace quadsim::stl {

namespace {

enum class Tok {
  End, Sep,          // ';' or newline at bracket depth 0
  Ident, Number,
  LParen, RParen, LBracket, RBracket, Comma, Caret,
  Plus, Minus, Star, Slash,
  Gt, Lt, Ge, Le, Assign,
  Bang, Amp, Pipe, Arrow,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    skip_space();
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = Tok::End;
      return;
    }
    const char c = src_[pos_];
    if (c == '\n') {
      get();
      tok_.kind = Tok::Sep;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string id;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        id += get();
      tok_.kind = Tok::Ident;
      tok_.text = std::move(id);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      lex_number();
      return;
    }
    get();
    switch (c) {
      case ';': tok_.kind = Tok::Sep; return;
      case '(': ++depth_; tok_.kind = Tok::LParen; return;
      case ')': --depth_; tok_.kind = Tok::RParen; return;
      case '[': ++depth_; tok_.kind = Tok::LBracket; return;
      case ']': --depth_; tok_.kind = Tok::RBracket; return;
      case ',': tok_.kind = Tok::Comma; return;
      case '^': tok_.kind = Tok::Caret; return;
      case '+': tok_.kind = Tok::Plus; return;
      case '*': tok_.kind = Tok::Star; return;
      case '/': tok_.kind = Tok::Slash; return;
      case '!': tok_.kind = Tok::Bang; return;
      case '&': tok_.kind = Tok::Amp; return;
      case '|': tok_.kind = Tok::Pipe; return;
      case '=': tok_.kind = Tok::Assign; return;
      case '-':
        if (pos_ < src_.size() && src_[pos_] == '>') {
          get();
          tok_.kind = Tok::Arrow;
        } else {
          tok_.kind = Tok::Minus;
        }
        return;
      case '>':
        if (pos_ < src_.size() && src_[pos_] == '=') {
          get();
          tok_.kind = Tok::Ge;
        } else {
          tok_.kind = Tok::Gt;
        }
        return;
      case '<':
        if (pos_ < src_.size() && src_[pos_] == '=') {
          get();
          tok_.kind = Tok::Le;
        } else {
          tok_.kind = Tok::Lt;
        }
        return;
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", tok_.line, tok_.col);
    }
  }

  void lex_number() {
    std::string num;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
        num += get();
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      num += get();
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      num += get();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) num += get();
      digits();
    }
    tok_.kind = Tok::Number;
    tok_.number = std::strtod(num.c_str(), nullptr);
    tok_.text = std::move(num);
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') get();
      } else if (c == '\n') {
        if (depth_ > 0) {
          get();  // newlines inside brackets are plain whitespace
        } else {
          return;
        }
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        get();
      } else {
        return;
      }
    }
  }

  char get() {
    const char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  int depth_ = 0;
  Token tok_;
};

using Node = std::variant<TermPtr, FormulaPtr>;

class Parser {
 public:
  Parser(Builder& builder, std::string_view text) : b_(builder), lex_(text) {}

  Specification parse_spec_body(std::shared_ptr<Builder> owner) {
    Specification spec;
    spec.builder = std::move(owner);
    for (;;) {
      while (lex_.peek().kind == Tok::Sep) lex_.take();
      if (lex_.peek().kind == Tok::End) break;
      const Token name = expect(Tok::Ident, "definition name");
      if (defs_.count(name.text))
        throw ParseError("duplicate definition of '" + name.text + "'", name.line, name.col);
      expect(Tok::Assign, "'='");
      Node value = parse_expression();
      end_of_definition();
      defs_.emplace(name.text, value);
      spec.definitions.emplace_back(name.text, std::move(value));
    }
    if (spec.definitions.empty()) throw ParseError("empty specification", 1, 1);
    return spec;
  }

  Node parse_single() {
    while (lex_.peek().kind == Tok::Sep) lex_.take();
    Node n = parse_expression();
    while (lex_.peek().kind == Tok::Sep) lex_.take();
    if (lex_.peek().kind != Tok::End)
      throw ParseError("trailing input after expression", lex_.peek().line, lex_.peek().col);
    return n;
  }

 private:
  Token expect(Tok kind, const std::string& what) {
    if (lex_.peek().kind != kind)
      throw ParseError("expected " + what, lex_.peek().line, lex_.peek().col);
    return lex_.take();
  }

  void end_of_definition() {
    const auto k = lex_.peek().kind;
    if (k == Tok::Sep) {
      lex_.take();
    } else if (k != Tok::End) {
      throw ParseError("expected end of definition", lex_.peek().line, lex_.peek().col);
    }
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(msg, lex_.peek().line, lex_.peek().col);
  }

  TermPtr as_term(Node n, const Token& at) {
    if (auto* t = std::get_if<TermPtr>(&n)) return *t;
    throw ParseError("expected a term", at.line, at.col);
  }

  FormulaPtr as_formula(Node n, const Token& at) {
    if (auto* f = std::get_if<FormulaPtr>(&n)) return *f;
    throw ParseError("expected a formula", at.line, at.col);
  }

  bool ident_is(const char* kw) const {
    return lex_.peek().kind == Tok::Ident && lex_.peek().text == kw;
  }

  // expression := implication
  Node parse_expression() { return parse_implication(); }

  Node parse_implication() {
    const Token at = lex_.peek();
    Node lhs = parse_or();
    if (lex_.peek().kind == Tok::Arrow) {
      lex_.take();
      Node rhs = parse_implication();
      return Node{b_.implies(as_formula(lhs, at), as_formula(rhs, at))};
    }
    return lhs;
  }

  Node parse_or() {
    const Token at = lex_.peek();
    Node lhs = parse_and();
    while (lex_.peek().kind == Tok::Pipe) {
      lex_.take();
      Node rhs = parse_and();
      lhs = Node{b_.disjunction(as_formula(lhs, at), as_formula(rhs, at))};
    }
    return lhs;
  }

  Node parse_and() {
    const Token at = lex_.peek();
    Node lhs = parse_until();
    while (lex_.peek().kind == Tok::Amp) {
      lex_.take();
      Node rhs = parse_until();
      lhs = Node{b_.conjunction(as_formula(lhs, at), as_formula(rhs, at))};
    }
    return lhs;
  }

  // until := ['Forall'|'Exists'|'Max'|'Min'] operand [('U' window ['^' default] | 'Uavg' window) operand]
  Node parse_until() {
    const Token at = lex_.peek();
    std::optional<bool> formula_agg;  // Forall=true / Exists=false
    std::optional<bool> term_agg;     // Max=true / Min=false
    if (ident_is("Forall") || ident_is("Exists")) {
      formula_agg = lex_.take().text == "Forall";
    } else if (ident_is("Max") || ident_is("Min")) {
      term_agg = lex_.take().text == "Max";
    }
    Node lhs = parse_comparison();

    const bool is_until = ident_is("U");
    const bool is_avg = ident_is("Uavg");
    if (!is_until && !is_avg) {
      if (formula_agg || term_agg)
        throw ParseError("aggregate prefix must be followed by U[...]", at.line, at.col);
      return lhs;
    }
    lex_.take();
    const Interval w = parse_window();

    if (is_avg) {
      if (formula_agg || term_agg)
        throw ParseError("Uavg takes plain formula operands", at.line, at.col);
      const Token rt = lex_.peek();
      Node rhs = parse_comparison();
      return Node{b_.avg_until(as_formula(lhs, at), w, as_formula(rhs, rt))};
    }

    std::optional<std::variant<double, bool>> dflt;
    if (lex_.peek().kind == Tok::Caret) {
      lex_.take();
      dflt = parse_default();
    }
    const Token rt = lex_.peek();
    Node rhs = parse_comparison();
    FormulaPtr trigger = as_formula(rhs, rt);

    if (term_agg) {
      if (!dflt || !std::holds_alternative<double>(*dflt))
        throw ParseError("Max/Min until needs a real default (^d)", at.line, at.col);
      return Node{b_.agg_until(*term_agg, as_term(lhs, at), w, std::get<double>(*dflt), trigger)};
    }
    if (formula_agg) {
      if (!dflt || !std::holds_alternative<bool>(*dflt))
        throw ParseError("Forall/Exists until needs a boolean default (^true|^false)", at.line,
                         at.col);
      return Node{b_.agg_until(*formula_agg, as_formula(lhs, at), w, std::get<bool>(*dflt),
                               trigger)};
    }
    if (std::holds_alternative<TermPtr>(lhs)) {
      if (!dflt || !std::holds_alternative<double>(*dflt))
        throw ParseError("term until needs a real default (^d)", at.line, at.col);
      return Node{b_.sample_until(std::get<TermPtr>(lhs), w, std::get<double>(*dflt), trigger)};
    }
    if (!dflt)  // classic STL until
      return Node{b_.until(std::get<FormulaPtr>(lhs), w, trigger)};
    if (!std::holds_alternative<bool>(*dflt))
      throw ParseError("formula until needs a boolean default", at.line, at.col);
    return Node{b_.sample_until(std::get<FormulaPtr>(lhs), w, std::get<bool>(*dflt), trigger)};
  }

  Node parse_comparison() {
    const Token at = lex_.peek();
    Node lhs = parse_sum();
    const Tok k = lex_.peek().kind;
    if (k != Tok::Gt && k != Tok::Lt && k != Tok::Ge && k != Tok::Le) return lhs;
    lex_.take();
    const Token rt = lex_.peek();
    Node rhs = parse_sum();
    TermPtr a = as_term(lhs, at);
    TermPtr b = as_term(rhs, rt);
    switch (k) {
      case Tok::Gt: return Node{b_.gt(a, b)};
      case Tok::Lt: return Node{b_.lt(a, b)};
      case Tok::Ge: return Node{b_.ge(a, b)};
      default: return Node{b_.le(a, b)};
    }
  }

  Node parse_sum() {
    const Token at = lex_.peek();
    Node lhs = parse_product();
    for (;;) {
      const Tok k = lex_.peek().kind;
      if (k != Tok::Plus && k != Tok::Minus) return lhs;
      lex_.take();
      const Token rt = lex_.peek();
      Node rhs = parse_product();
      lhs = Node{k == Tok::Plus ? b_.add(as_term(lhs, at), as_term(rhs, rt))
                                : b_.sub(as_term(lhs, at), as_term(rhs, rt))};
    }
  }

  Node parse_product() {
    const Token at = lex_.peek();
    Node lhs = parse_unary();
    for (;;) {
      const Tok k = lex_.peek().kind;
      if (k != Tok::Star && k != Tok::Slash) return lhs;
      lex_.take();
      const Token rt = lex_.peek();
      Node rhs = parse_unary();
      lhs = Node{k == Tok::Star ? b_.mul(as_term(lhs, at), as_term(rhs, rt))
                                : b_.div(as_term(lhs, at), as_term(rhs, rt))};
    }
  }

  Node parse_unary() {
    const Token at = lex_.peek();
    if (at.kind == Tok::Minus) {
      lex_.take();
      return Node{b_.neg(as_term(parse_unary(), at))};
    }
    if (at.kind == Tok::Bang) {
      lex_.take();
      return Node{b_.negation(as_formula(parse_unary(), at))};
    }
    return parse_primary();
  }

  Node parse_primary() {
    const Token at = lex_.peek();
    switch (at.kind) {
      case Tok::Number:
        lex_.take();
        return Node{b_.constant(at.number)};
      case Tok::LParen: {
        lex_.take();
        Node inner = parse_expression();
        expect(Tok::RParen, "')'");
        return inner;
      }
      case Tok::Ident: break;
      default: fail("expected an expression");
    }

    const std::string& id = at.text;
    if (id == "true") { lex_.take(); return Node{b_.top()}; }
    if (id == "false") { lex_.take(); return Node{b_.bottom()}; }
    if (id == "inf") { lex_.take(); return Node{b_.constant(std::numeric_limits<double>::infinity())}; }
    if (id == "time") { lex_.take(); return Node{b_.time()}; }
    if (id == "abs") return parse_call(FuncOp::Abs, 1);
    if (id == "min") return parse_call(FuncOp::Min, 2);
    if (id == "max") return parse_call(FuncOp::Max, 2);
    if (id == "ite") return parse_ite();
    if (id == "On") return parse_on();
    if (id == "G" || id == "F") return parse_gf();
    if (id == "D") return parse_lookup();

    lex_.take();
    const auto it = defs_.find(id);
    if (it != defs_.end()) return it->second;
    return Node{b_.signal(id)};
  }

  Node parse_call(FuncOp op, int arity) {
    lex_.take();
    expect(Tok::LParen, "'('");
    std::vector<TermPtr> args;
    for (int i = 0; i < arity; ++i) {
      if (i > 0) expect(Tok::Comma, "','");
      const Token t = lex_.peek();
      args.push_back(as_term(parse_expression(), t));
    }
    expect(Tok::RParen, "')'");
    return Node{b_.func(op, std::move(args))};
  }

  Node parse_ite() {
    lex_.take();
    expect(Tok::LParen, "'('");
    const Token c = lex_.peek();
    FormulaPtr cond = as_formula(parse_expression(), c);
    expect(Tok::Comma, "','");
    const Token t1 = lex_.peek();
    TermPtr then_t = as_term(parse_expression(), t1);
    expect(Tok::Comma, "','");
    const Token t2 = lex_.peek();
    TermPtr else_t = as_term(parse_expression(), t2);
    expect(Tok::RParen, "')'");
    return Node{b_.ite(cond, then_t, else_t)};
  }

  Node parse_on() {
    const Token at = lex_.take();
    const Interval w = parse_window();
    if (ident_is("Max") || ident_is("Min")) {
      const bool is_max = lex_.take().text == "Max";
      const Token st = lex_.peek();
      return Node{b_.window_agg(is_max, w, as_term(parse_unary(), st))};
    }
    if (ident_is("Forall") || ident_is("Exists")) {
      const bool is_forall = lex_.take().text == "Forall";
      const Token st = lex_.peek();
      return Node{b_.window_agg(is_forall, w, as_formula(parse_unary(), st))};
    }
    throw ParseError("On[...] must be followed by Max, Min, Forall or Exists", at.line, at.col);
  }

  Node parse_gf() {
    const Token at = lex_.take();
    const Interval w = parse_window();
    const Token st = lex_.peek();
    FormulaPtr f = as_formula(parse_unary(), st);
    return Node{at.text == "G" ? b_.globally(w, f) : b_.finally_(w, f)};
  }

  Node parse_lookup() {
    const Token at = lex_.take();
    expect(Tok::LBracket, "'['");
    const double a = parse_signed_number();
    expect(Tok::RBracket, "']'");
    expect(Tok::Caret, "'^'");
    const auto dflt = parse_default();
    Node operand = parse_unary();
    if (std::holds_alternative<TermPtr>(operand)) {
      if (!std::holds_alternative<double>(dflt))
        throw ParseError("term lookup needs a real default", at.line, at.col);
      return Node{b_.lookup(a, std::get<double>(dflt), std::get<TermPtr>(operand))};
    }
    if (!std::holds_alternative<bool>(dflt))
      throw ParseError("formula lookup needs a boolean default", at.line, at.col);
    return Node{b_.lookup(a, std::get<bool>(dflt), std::get<FormulaPtr>(operand))};
  }

  Interval parse_window() {
    const Token at = lex_.peek();
    expect(Tok::LBracket, "'['");
    const double lo = parse_signed_number();
    expect(Tok::Comma, "','");
    const double hi = parse_signed_number();
    expect(Tok::RBracket, "']'");
    if (!(lo <= hi)) throw ParseError("malformed window: lower bound exceeds upper", at.line, at.col);
    return Interval{lo, hi};
  }

  double parse_signed_number() {
    double sign = 1.0;
    while (lex_.peek().kind == Tok::Minus || lex_.peek().kind == Tok::Plus) {
      if (lex_.take().kind == Tok::Minus) sign = -sign;
    }
    if (lex_.peek().kind == Tok::Number) return sign * lex_.take().number;
    if (ident_is("inf")) {
      lex_.take();
      return sign * std::numeric_limits<double>::infinity();
    }
    fail("expected a number");
  }

  std::variant<double, bool> parse_default() {
    if (ident_is("true")) { lex_.take(); return true; }
    if (ident_is("false")) { lex_.take(); return false; }
    return parse_signed_number();
  }

  Builder& b_;
  Lexer lex_;
  std::map<std::string, Node> defs_;
};

}  // namespace

Specification parse_spec(std::string_view text) {
  auto builder = std::make_shared<Builder>();
  Parser p(*builder, text);
  return p.parse_spec_body(builder);
}

FormulaPtr parse_formula(Builder& builder, std::string_view text) {
  Parser p(builder, text);
  Node n = p.parse_single();
  if (auto* f = std::get_if<FormulaPtr>(&n)) return *f;
  throw ParseError("expression is a term, expected a formula", 1, 1);
}

TermPtr parse_term(Builder& builder, std::string_view text) {
  Parser p(builder, text);
  Node n = p.parse_single();
  if (auto* t = std::get_if<TermPtr>(&n)) return *t;
  throw ParseError("expression is a formula, expected a term", 1, 1);
}

}  // namespace quadsim::stl
