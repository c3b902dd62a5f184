#include "quadsim/stl/ast.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace quadsim::stl {

namespace {

void key_double(std::string& k, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%a;", v);
  k += buf;
}

void key_ptr(std::string& k, const void* p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%p;", p);
  k += buf;
}

// Shortest round-trip form so printed specifications re-parse exactly.
std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

bool Builder::is_zero(const TermPtr& t) {
  return t && t->kind == TermKind::Constant && t->constant == 0.0;
}

void Builder::check_window(const Interval& w) {
  if (!(w.lo <= w.hi))
    throw SpecError("malformed window [" + fmt_num(w.lo) + "," + fmt_num(w.hi) + "]");
  if (std::isnan(w.lo) || std::isnan(w.hi)) throw SpecError("window bound is NaN");
}

TermPtr Builder::intern_term(Term node) {
  std::string k;
  k += static_cast<char>('a' + static_cast<int>(node.kind));
  key_double(k, node.constant);
  k += node.signal;
  k += ';';
  k += static_cast<char>('a' + static_cast<int>(node.op));
  for (const auto& a : node.args) key_ptr(k, a.get());
  key_ptr(k, node.formula.get());
  key_ptr(k, node.sub.get());
  key_ptr(k, node.sub2.get());
  k += node.is_max ? 'M' : 'm';
  key_double(k, node.window.lo);
  key_double(k, node.window.hi);
  key_double(k, node.dflt);
  auto it = term_pool_.find(k);
  if (it != term_pool_.end()) return it->second;
  auto ptr = std::make_shared<const Term>(std::move(node));
  term_pool_.emplace(std::move(k), ptr);
  return ptr;
}

FormulaPtr Builder::intern_formula(Formula node) {
  std::string k;
  k += static_cast<char>('A' + static_cast<int>(node.kind));
  key_ptr(k, node.term.get());
  key_ptr(k, node.lhs.get());
  key_ptr(k, node.rhs.get());
  k += node.is_forall ? 'F' : 'E';
  key_double(k, node.window.lo);
  key_double(k, node.window.hi);
  k += node.dflt ? 'T' : 'B';
  auto it = formula_pool_.find(k);
  if (it != formula_pool_.end()) return it->second;
  auto ptr = std::make_shared<const Formula>(std::move(node));
  formula_pool_.emplace(std::move(k), ptr);
  return ptr;
}

TermPtr Builder::constant(double c) {
  Term t{TermKind::Constant};
  t.constant = c;
  return intern_term(std::move(t));
}

TermPtr Builder::signal(const std::string& name) {
  Term t{TermKind::Signal};
  t.signal = name;
  return intern_term(std::move(t));
}

TermPtr Builder::time() { return intern_term(Term{TermKind::Time}); }

TermPtr Builder::func(FuncOp op, std::vector<TermPtr> args) {
  const std::size_t arity = (op == FuncOp::Neg || op == FuncOp::Abs) ? 1 : 2;
  if (args.size() != arity) throw SpecError("function arity mismatch");
  for (const auto& a : args)
    if (!a) throw SpecError("null term argument");
  // Constant folding of unary minus keeps negative literals canonical.
  if (op == FuncOp::Neg && args[0]->kind == TermKind::Constant)
    return constant(-args[0]->constant);
  Term t{TermKind::Func};
  t.op = op;
  t.args = std::move(args);
  return intern_term(std::move(t));
}

TermPtr Builder::ite(FormulaPtr cond, TermPtr then_term, TermPtr else_term) {
  if (!cond || !then_term || !else_term) throw SpecError("null ite argument");
  Term t{TermKind::Ite};
  t.formula = std::move(cond);
  t.sub = std::move(then_term);
  t.sub2 = std::move(else_term);
  return intern_term(std::move(t));
}

TermPtr Builder::window_agg(bool is_max, Interval w, TermPtr subject) {
  check_window(w);
  if (!subject) throw SpecError("null aggregate subject");
  Term t{TermKind::WindowAgg};
  t.is_max = is_max;
  t.window = w;
  t.sub = std::move(subject);
  return intern_term(std::move(t));
}

TermPtr Builder::agg_until(bool is_max, TermPtr subject, Interval w, double dflt,
                           FormulaPtr trigger) {
  check_window(w);
  if (!subject || !trigger) throw SpecError("null until argument");
  Term t{TermKind::AggUntil};
  t.is_max = is_max;
  t.window = w;
  t.dflt = dflt;
  t.sub = std::move(subject);
  t.formula = std::move(trigger);
  return intern_term(std::move(t));
}

TermPtr Builder::sample_until(TermPtr subject, Interval w, double dflt, FormulaPtr trigger) {
  check_window(w);
  if (!subject || !trigger) throw SpecError("null until argument");
  Term t{TermKind::SampleUntil};
  t.window = w;
  t.dflt = dflt;
  t.sub = std::move(subject);
  t.formula = std::move(trigger);
  return intern_term(std::move(t));
}

TermPtr Builder::lookup(double at, double dflt, TermPtr subject) {
  return sample_until(std::move(subject), Interval{at, at}, dflt, top());
}

FormulaPtr Builder::top() { return intern_formula(Formula{FormulaKind::True}); }
FormulaPtr Builder::bottom() { return intern_formula(Formula{FormulaKind::False}); }

FormulaPtr Builder::positive(TermPtr term) {
  if (!term) throw SpecError("null comparison term");
  Formula f{FormulaKind::Positive};
  f.term = std::move(term);
  return intern_formula(std::move(f));
}

FormulaPtr Builder::negation(FormulaPtr a) {
  if (!a) throw SpecError("null negation operand");
  Formula f{FormulaKind::Not};
  f.lhs = std::move(a);
  return intern_formula(std::move(f));
}

FormulaPtr Builder::conjunction(FormulaPtr a, FormulaPtr b) {
  if (!a || !b) throw SpecError("null conjunction operand");
  Formula f{FormulaKind::And};
  f.lhs = std::move(a);
  f.rhs = std::move(b);
  return intern_formula(std::move(f));
}

FormulaPtr Builder::disjunction(FormulaPtr a, FormulaPtr b) {
  if (!a || !b) throw SpecError("null disjunction operand");
  Formula f{FormulaKind::Or};
  f.lhs = std::move(a);
  f.rhs = std::move(b);
  return intern_formula(std::move(f));
}

FormulaPtr Builder::window_agg(bool is_forall, Interval w, FormulaPtr subject) {
  check_window(w);
  if (!subject) throw SpecError("null aggregate subject");
  Formula f{FormulaKind::WindowAgg};
  f.is_forall = is_forall;
  f.window = w;
  f.lhs = std::move(subject);
  return intern_formula(std::move(f));
}

FormulaPtr Builder::agg_until(bool is_forall, FormulaPtr payload, Interval w, bool dflt,
                              FormulaPtr trigger) {
  check_window(w);
  if (!payload || !trigger) throw SpecError("null until argument");
  Formula f{FormulaKind::AggUntil};
  f.is_forall = is_forall;
  f.window = w;
  f.dflt = dflt;
  f.lhs = std::move(payload);
  f.rhs = std::move(trigger);
  return intern_formula(std::move(f));
}

FormulaPtr Builder::sample_until(FormulaPtr payload, Interval w, bool dflt, FormulaPtr trigger) {
  check_window(w);
  if (!payload || !trigger) throw SpecError("null until argument");
  Formula f{FormulaKind::SampleUntil};
  f.window = w;
  f.dflt = dflt;
  f.lhs = std::move(payload);
  f.rhs = std::move(trigger);
  return intern_formula(std::move(f));
}

FormulaPtr Builder::avg_until(FormulaPtr payload, Interval w, FormulaPtr trigger) {
  check_window(w);
  if (!payload || !trigger) throw SpecError("null until argument");
  Formula f{FormulaKind::AvgUntil};
  f.window = w;
  f.lhs = std::move(payload);
  f.rhs = std::move(trigger);
  return intern_formula(std::move(f));
}

FormulaPtr Builder::lookup(double at, bool dflt, FormulaPtr subject) {
  return sample_until(std::move(subject), Interval{at, at}, dflt, top());
}

const std::variant<TermPtr, FormulaPtr>* Specification::find(const std::string& name) const {
  for (const auto& [n, def] : definitions)
    if (n == name) return &def;
  return nullptr;
}

namespace {

std::string win_str(const Interval& w) {
  return "[" + fmt_num(w.lo) + "," + fmt_num(w.hi) + "]";
}

}  // namespace

std::string to_string(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Constant: return fmt_num(t->constant);
    case TermKind::Signal: return t->signal;
    case TermKind::Time: return "time";
    case TermKind::Func: {
      const auto& a = t->args;
      switch (t->op) {
        case FuncOp::Add: return "(" + to_string(a[0]) + " + " + to_string(a[1]) + ")";
        case FuncOp::Sub: return "(" + to_string(a[0]) + " - " + to_string(a[1]) + ")";
        case FuncOp::Mul: return "(" + to_string(a[0]) + " * " + to_string(a[1]) + ")";
        case FuncOp::Div: return "(" + to_string(a[0]) + " / " + to_string(a[1]) + ")";
        case FuncOp::Neg: return "(-" + to_string(a[0]) + ")";
        case FuncOp::Abs: return "abs(" + to_string(a[0]) + ")";
        case FuncOp::Min: return "min(" + to_string(a[0]) + ", " + to_string(a[1]) + ")";
        case FuncOp::Max: return "max(" + to_string(a[0]) + ", " + to_string(a[1]) + ")";
      }
      return "?";
    }
    case TermKind::Ite:
      return "ite(" + to_string(t->formula) + ", " + to_string(t->sub) + ", " +
             to_string(t->sub2) + ")";
    case TermKind::WindowAgg:
      return "On" + win_str(t->window) + (t->is_max ? " Max " : " Min ") + to_string(t->sub);
    case TermKind::AggUntil:
      return "(" + std::string(t->is_max ? "Max " : "Min ") + to_string(t->sub) + " U" +
             win_str(t->window) + "^" + fmt_num(t->dflt) + " " + to_string(t->formula) + ")";
    case TermKind::SampleUntil:
      return "(" + to_string(t->sub) + " U" + win_str(t->window) + "^" + fmt_num(t->dflt) +
             " " + to_string(t->formula) + ")";
  }
  return "?";
}

std::string to_string(const FormulaPtr& f) {
  switch (f->kind) {
    case FormulaKind::True: return "true";
    case FormulaKind::False: return "false";
    case FormulaKind::Positive: return "(" + to_string(f->term) + " > 0)";
    case FormulaKind::Not: return "!" + to_string(f->lhs);
    case FormulaKind::And: return "(" + to_string(f->lhs) + " & " + to_string(f->rhs) + ")";
    case FormulaKind::Or: return "(" + to_string(f->lhs) + " | " + to_string(f->rhs) + ")";
    case FormulaKind::WindowAgg:
      return "On" + win_str(f->window) + (f->is_forall ? " Forall " : " Exists ") +
             to_string(f->lhs);
    case FormulaKind::AggUntil:
      return "(" + std::string(f->is_forall ? "Forall " : "Exists ") + to_string(f->lhs) +
             " U" + win_str(f->window) + "^" + (f->dflt ? "true" : "false") + " " +
             to_string(f->rhs) + ")";
    case FormulaKind::SampleUntil:
      return "(" + to_string(f->lhs) + " U" + win_str(f->window) + "^" +
             (f->dflt ? "true" : "false") + " " + to_string(f->rhs) + ")";
    case FormulaKind::AvgUntil:
      return "(" + to_string(f->lhs) + " Uavg" + win_str(f->window) + " " + to_string(f->rhs) +
             ")";
  }
  return "?";
}

}  // namespace quadsim::stl
