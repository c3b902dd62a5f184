#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace quadsim::stl {

class SpecError : public std::runtime_error {
 public:
  explicit SpecError(const std::string& what) : std::runtime_error(what) {}
};

struct Term;
struct Formula;
using TermPtr = std::shared_ptr<const Term>;
using FormulaPtr = std::shared_ptr<const Formula>;

// Relative time window [lo, hi], lo <= hi.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

enum class TermKind {
  Constant,     // c
  Signal,       // named trace signal
  Time,         // built-in time signal
  Func,         // fixed catalog application
  Ite,          // ite(cond, then, otherwise)
  WindowAgg,    // On[a,b] Max/Min term
  AggUntil,     // (Max|Min term) U[a,b]^d trigger
  SampleUntil,  // term U[a,b]^d trigger
};

enum class FuncOp { Add, Sub, Mul, Div, Neg, Abs, Min, Max };

struct Term {
  TermKind kind;
  double constant = 0.0;                 // Constant
  std::string signal;                    // Signal
  FuncOp op = FuncOp::Add;               // Func
  std::vector<TermPtr> args;             // Func
  FormulaPtr formula;                    // Ite condition / until trigger
  TermPtr sub;                           // Ite then / aggregate subject / sampled term
  TermPtr sub2;                          // Ite otherwise
  bool is_max = false;                   // WindowAgg / AggUntil flavor
  Interval window{};                     // WindowAgg / untils
  double dflt = 0.0;                     // until default (may be +-inf)
};

enum class FormulaKind {
  True,
  False,
  Positive,     // term > 0
  Not,
  And,
  Or,
  WindowAgg,    // On[a,b] Forall/Exists formula
  AggUntil,     // (Forall|Exists payload) U[a,b]^d trigger
  SampleUntil,  // payload U[a,b]^d trigger
  AvgUntil,     // payload Uavg[a,b] trigger
};

struct Formula {
  FormulaKind kind;
  TermPtr term;        // Positive
  FormulaPtr lhs;      // Not operand / And-Or left / payload / aggregate subject
  FormulaPtr rhs;      // And-Or right / until trigger
  bool is_forall = false;
  Interval window{};
  bool dflt = false;   // until default
};

// Hash-consing factory: structurally identical nodes are shared, which makes
// per-(node, t) memoization effective across common subformulas. Keep the
// builder alive as long as its nodes are in use.
class Builder {
 public:
  TermPtr constant(double c);
  TermPtr signal(const std::string& name);
  TermPtr time();
  TermPtr func(FuncOp op, std::vector<TermPtr> args);
  TermPtr add(TermPtr a, TermPtr b) { return func(FuncOp::Add, {a, b}); }
  TermPtr sub(TermPtr a, TermPtr b) { return func(FuncOp::Sub, {a, b}); }
  TermPtr mul(TermPtr a, TermPtr b) { return func(FuncOp::Mul, {a, b}); }
  TermPtr div(TermPtr a, TermPtr b) { return func(FuncOp::Div, {a, b}); }
  TermPtr neg(TermPtr a) { return func(FuncOp::Neg, {a}); }
  TermPtr abs(TermPtr a) { return func(FuncOp::Abs, {a}); }
  TermPtr min(TermPtr a, TermPtr b) { return func(FuncOp::Min, {a, b}); }
  TermPtr max(TermPtr a, TermPtr b) { return func(FuncOp::Max, {a, b}); }
  TermPtr ite(FormulaPtr cond, TermPtr then_term, TermPtr else_term);
  TermPtr window_agg(bool is_max, Interval w, TermPtr subject);
  TermPtr agg_until(bool is_max, TermPtr subject, Interval w, double dflt, FormulaPtr trigger);
  TermPtr sample_until(TermPtr subject, Interval w, double dflt, FormulaPtr trigger);
  // Derived: D_a^d term = term U[a,a]^d true.
  TermPtr lookup(double at, double dflt, TermPtr subject);

  FormulaPtr top();
  FormulaPtr bottom();
  FormulaPtr positive(TermPtr term);  // term > 0
  FormulaPtr negation(FormulaPtr f);
  FormulaPtr conjunction(FormulaPtr a, FormulaPtr b);
  FormulaPtr disjunction(FormulaPtr a, FormulaPtr b);
  FormulaPtr implies(FormulaPtr a, FormulaPtr b) { return disjunction(negation(a), b); }
  FormulaPtr window_agg(bool is_forall, Interval w, FormulaPtr subject);
  FormulaPtr agg_until(bool is_forall, FormulaPtr payload, Interval w, bool dflt,
                       FormulaPtr trigger);
  FormulaPtr sample_until(FormulaPtr payload, Interval w, bool dflt, FormulaPtr trigger);
  FormulaPtr avg_until(FormulaPtr payload, Interval w, FormulaPtr trigger);
  // Derived operators.
  FormulaPtr lookup(double at, bool dflt, FormulaPtr subject);
  FormulaPtr finally_(Interval w, FormulaPtr f) { return window_agg(false, w, f); }
  FormulaPtr globally(Interval w, FormulaPtr f) { return window_agg(true, w, f); }
  FormulaPtr until(FormulaPtr f1, Interval w, FormulaPtr f2) {
    return agg_until(true, f1, w, false, f2);
  }
  // Comparison sugar over the core `term > 0`; comparisons against the
  // literal 0 stay in core form.
  FormulaPtr gt(TermPtr a, TermPtr b) {
    if (is_zero(b)) return positive(std::move(a));
    return positive(sub(std::move(a), std::move(b)));
  }
  FormulaPtr lt(TermPtr a, TermPtr b) {
    if (is_zero(a)) return positive(std::move(b));
    return positive(sub(std::move(b), std::move(a)));
  }
  FormulaPtr ge(TermPtr a, TermPtr b) { return negation(lt(std::move(a), std::move(b))); }
  FormulaPtr le(TermPtr a, TermPtr b) { return negation(gt(std::move(a), std::move(b))); }

 private:
  static bool is_zero(const TermPtr& t);
  static void check_window(const Interval& w);
  TermPtr intern_term(Term node);
  FormulaPtr intern_formula(Formula node);

  // Structural key -> node. std::map on an encoded key keeps this simple.
  std::map<std::string, TermPtr> term_pool_;
  std::map<std::string, FormulaPtr> formula_pool_;
};

// A parsed specification: named formulas and terms in definition order.
struct Specification {
  std::shared_ptr<Builder> builder;
  std::vector<std::pair<std::string, std::variant<TermPtr, FormulaPtr>>> definitions;

  const std::variant<TermPtr, FormulaPtr>* find(const std::string& name) const;
};

std::string to_string(const TermPtr& t);
std::string to_string(const FormulaPtr& f);

}  // namespace quadsim::stl
