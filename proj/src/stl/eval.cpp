#include "quadsim/stl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace quadsim::stl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Product with the convention 0 * (+-inf) = 0.
double safe_mul(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}

}  // namespace

int Evaluator::signal_index(const Term* node) {
  auto it = signals_.find(node);
  if (it != signals_.end()) return it->second;
  const int idx = trace_.signal_index(node->signal);
  if (idx < 0) throw EvalError("unknown signal: " + node->signal);
  signals_.emplace(node, idx);
  return idx;
}

template <class F>
double Evaluator::window_extremum(WinCache& c, double lo, double hi, bool take_max, F&& f) {
  if (hi < lo) std::swap(lo, hi);
  const auto better = [take_max](double a, double b) { return take_max ? a > b : a < b; };
  const auto times = trace_.times();

  double best_t, best_v;
  if (c.valid && lo >= c.lo && hi >= c.hi && c.witness >= lo) {
    // Cached extremum still in-window: rescan only the uncovered suffix.
    best_t = c.witness;
    best_v = c.value;
    const double at_lo = f(lo);
    if (better(at_lo, best_v)) {
      best_t = lo;
      best_v = at_lo;
    }
    for (std::size_t i = trace_.first_after(c.hi); i < times.size() && times[i] <= hi; ++i) {
      const double v = f(times[i]);
      if (better(v, best_v)) {
        best_t = times[i];
        best_v = v;
      }
    }
  } else {
    best_t = lo;
    best_v = f(lo);
    for (std::size_t i = trace_.first_after(lo); i < times.size() && times[i] <= hi; ++i) {
      const double v = f(times[i]);
      if (better(v, best_v)) {
        best_t = times[i];
        best_v = v;
      }
    }
  }
  c = WinCache{true, lo, hi, best_t, best_v};
  return best_v;
}

std::optional<double> Evaluator::first_witness(const FormulaPtr& trigger, double lo, double hi) {
  std::optional<double> found;
  trace_.for_grid(lo, hi, [&](double x) {
    if (sat(trigger, x)) {
      found = x;
      return false;
    }
    return true;
  });
  return found;
}

double Evaluator::term(const TermPtr& node, double t) {
  const Key key{node.get(), t};
  if (auto it = term_memo_.find(key); it != term_memo_.end()) return it->second;
  const double v = term_uncached(node.get(), t);
  term_memo_.emplace(key, v);
  return v;
}

double Evaluator::term_uncached(const Term* node, double t) {
  switch (node->kind) {
    case TermKind::Constant:
      return node->constant;
    case TermKind::Time:
      return t;
    case TermKind::Signal:
      return trace_.value(signal_index(node), t);
    case TermKind::Func: {
      const double a = term(node->args[0], t);
      switch (node->op) {
        case FuncOp::Neg: return -a;
        case FuncOp::Abs: return std::abs(a);
        default: break;
      }
      const double b = term(node->args[1], t);
      switch (node->op) {
        case FuncOp::Add: return a + b;
        case FuncOp::Sub: return a - b;
        case FuncOp::Mul: return a * b;
        case FuncOp::Div:
          if (b == 0.0) throw EvalError("division by zero at t=" + std::to_string(t));
          return a / b;
        case FuncOp::Min: return std::min(a, b);
        case FuncOp::Max: return std::max(a, b);
        default: break;
      }
      throw EvalError("bad function node");
    }
    case TermKind::Ite:
      return sat(node->formula, t) ? term(node->sub, t) : term(node->sub2, t);
    case TermKind::WindowAgg: {
      auto f = [&](double x) { return term(node->sub, x); };
      return window_extremum(win_term_[node], t + node->window.lo, t + node->window.hi,
                             node->is_max, f);
    }
    case TermKind::AggUntil: {
      const auto w = first_witness(node->formula, t + node->window.lo, t + node->window.hi);
      if (!w) return node->dflt;
      auto f = [&](double x) { return term(node->sub, x); };
      return window_extremum(win_term_[node], t, *w, node->is_max, f);
    }
    case TermKind::SampleUntil: {
      const auto w = first_witness(node->formula, t + node->window.lo, t + node->window.hi);
      return w ? term(node->sub, *w) : node->dflt;
    }
  }
  throw EvalError("bad term node");
}

bool Evaluator::sat(const FormulaPtr& node, double t) {
  const Key key{node.get(), t};
  if (auto it = sat_memo_.find(key); it != sat_memo_.end()) return it->second != 0;
  const bool v = sat_uncached(node.get(), t);
  sat_memo_.emplace(key, v ? 1 : 0);
  return v;
}

bool Evaluator::sat_uncached(const Formula* node, double t) {
  switch (node->kind) {
    case FormulaKind::True:
      return true;
    case FormulaKind::False:
      return false;
    case FormulaKind::Positive:
      return term(node->term, t) > 0.0;
    case FormulaKind::Not:
      return !sat(node->lhs, t);
    case FormulaKind::And:
      return sat(node->lhs, t) && sat(node->rhs, t);
    case FormulaKind::Or:
      return sat(node->lhs, t) || sat(node->rhs, t);
    case FormulaKind::WindowAgg: {
      auto f = [&](double x) { return sat(node->lhs, x) ? 1.0 : 0.0; };
      // Forall == min over {0,1}; Exists == max.
      const double v = window_extremum(win_sat_[node], t + node->window.lo,
                                       t + node->window.hi, !node->is_forall, f);
      return v > 0.5;
    }
    case FormulaKind::AggUntil: {
      const auto w = first_witness(node->rhs, t + node->window.lo, t + node->window.hi);
      if (!w) return node->dflt;
      auto f = [&](double x) { return sat(node->lhs, x) ? 1.0 : 0.0; };
      const double v = window_extremum(win_sat_[node], t, *w, !node->is_forall, f);
      return v > 0.5;
    }
    case FormulaKind::SampleUntil: {
      const auto w = first_witness(node->rhs, t + node->window.lo, t + node->window.hi);
      return w ? sat(node->lhs, *w) : node->dflt;
    }
    case FormulaKind::AvgUntil: {
      // Standard semantics: exactly the original STL Until.
      const auto w = first_witness(node->rhs, t + node->window.lo, t + node->window.hi);
      if (!w) return false;
      bool all = true;
      trace_.for_grid(t, *w, [&](double x) {
        if (!sat(node->lhs, x)) {
          all = false;
          return false;
        }
        return true;
      });
      return all;
    }
  }
  throw EvalError("bad formula node");
}

double Evaluator::rho(const FormulaPtr& node, double t) {
  const Key key{node.get(), t};
  if (auto it = rho_memo_.find(key); it != rho_memo_.end()) return it->second;
  const double v = rho_uncached(node.get(), t);
  rho_memo_.emplace(key, v);
  return v;
}

double Evaluator::rho_uncached(const Formula* node, double t) {
  switch (node->kind) {
    case FormulaKind::True:
      return kInf;
    case FormulaKind::False:
      return -kInf;
    case FormulaKind::Positive:
      return term(node->term, t);
    case FormulaKind::Not:
      return -rho(node->lhs, t);
    case FormulaKind::And:
      return std::min(rho(node->lhs, t), rho(node->rhs, t));
    case FormulaKind::Or:
      return std::max(rho(node->lhs, t), rho(node->rhs, t));
    case FormulaKind::WindowAgg: {
      auto f = [&](double x) { return rho(node->lhs, x); };
      return window_extremum(win_rho_[node], t + node->window.lo, t + node->window.hi,
                             !node->is_forall, f);
    }
    case FormulaKind::AggUntil: {
      // Witness search recurses on the standard semantics of the trigger;
      // the payload aggregate is robust.
      const auto w = first_witness(node->rhs, t + node->window.lo, t + node->window.hi);
      if (!w) return node->dflt ? kInf : -kInf;
      auto f = [&](double x) { return rho(node->lhs, x); };
      return window_extremum(win_rho_[node], t, *w, !node->is_forall, f);
    }
    case FormulaKind::SampleUntil: {
      const auto w = first_witness(node->rhs, t + node->window.lo, t + node->window.hi);
      return w ? rho(node->lhs, *w) : (node->dflt ? kInf : -kInf);
    }
    case FormulaKind::AvgUntil: {
      const auto w = first_witness(node->rhs, t + node->window.lo, t + node->window.hi);
      if (!w) return -kInf;
      auto f = [&](double x) { return rho(node->lhs, x); };
      const double m = window_extremum(win_rho_[node], t, *w, /*take_max=*/false, f);
      // Weight by the remaining window span; the absolute window end keeps the
      // weight non-negative at every evaluation time.
      return safe_mul((t + node->window.hi) - *w, m);
    }
  }
  throw EvalError("bad formula node");
}

namespace {

void check_monotone(std::span<const double> ts) {
  for (std::size_t i = 1; i < ts.size(); ++i)
    if (!(ts[i] > ts[i - 1]))
      throw std::invalid_argument("sliding aggregate query times must be strictly increasing");
}

}  // namespace

std::vector<double> sliding_aggregate(Builder& builder, bool take_max, const TermPtr& subject,
                                      Interval window, const Trace& trace,
                                      std::span<const double> query_times) {
  check_monotone(query_times);
  const TermPtr agg = builder.window_agg(take_max, window, subject);
  Evaluator ev(trace);
  std::vector<double> out;
  out.reserve(query_times.size());
  for (double t : query_times) out.push_back(ev.term(agg, t));
  return out;
}

std::vector<char> sliding_aggregate_bool(Builder& builder, bool is_forall,
                                         const FormulaPtr& subject, Interval window,
                                         const Trace& trace,
                                         std::span<const double> query_times) {
  check_monotone(query_times);
  const FormulaPtr agg = builder.window_agg(is_forall, window, subject);
  Evaluator ev(trace);
  std::vector<char> out;
  out.reserve(query_times.size());
  for (double t : query_times) out.push_back(ev.sat(agg, t) ? 1 : 0);
  return out;
}

std::vector<double> sliding_aggregate_robust(Builder& builder, bool is_forall,
                                             const FormulaPtr& subject, Interval window,
                                             const Trace& trace,
                                             std::span<const double> query_times) {
  check_monotone(query_times);
  const FormulaPtr agg = builder.window_agg(is_forall, window, subject);
  Evaluator ev(trace);
  std::vector<double> out;
  out.reserve(query_times.size());
  for (double t : query_times) out.push_back(ev.rho(agg, t));
  return out;
}

}  // namespace quadsim::stl
