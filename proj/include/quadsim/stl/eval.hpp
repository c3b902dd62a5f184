#pragma once

#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "quadsim/stl/ast.hpp"
#include "quadsim/stl/trace.hpp"

namespace quadsim::stl {

class EvalError : public std::runtime_error {
 public:
  explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

// Evaluates terms (standard semantics), formulas (standard Boolean semantics)
// and the robust quantitative semantics over one fixed trace.
//
// Window conventions: every windowed operator evaluates over the grid
//   {lo} ∪ (breakpoints ∩ (lo, hi])     for the absolute window [lo, hi],
// which keeps the semantics total on piecewise-constant traces. Until-style
// operators search the window [t+a, t+b] for the smallest grid instant where
// the trigger holds under the *standard* semantics; the payload is then
// evaluated under the semantics being computed.
//
// An instance memoizes per (node, t) and keeps per-node sliding-window caches
// that exploit monotonically increasing evaluation times (cached extremum
// witnesses are reused while they remain in-window; only the uncovered suffix
// is rescanned). Instances are single-threaded; distinct instances over the
// same trace may run in parallel.
class Evaluator {
 public:
  explicit Evaluator(const Trace& trace) : trace_(trace) {}

  double term(const TermPtr& node, double t);
  bool sat(const FormulaPtr& node, double t);
  double rho(const FormulaPtr& node, double t);

 private:
  struct Key {
    const void* node;
    double t;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      const std::size_t a = std::hash<const void*>{}(k.node);
      const std::size_t b = std::hash<double>{}(k.t);
      return a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
    }
  };
  struct WinCache {
    bool valid = false;
    double lo = 0, hi = 0;
    double witness = 0;  // instant where the cached extremum was found
    double value = 0;
  };

  template <class F>
  double window_extremum(WinCache& cache, double lo, double hi, bool take_max, F&& f);

  std::optional<double> first_witness(const FormulaPtr& trigger, double lo, double hi);
  int signal_index(const Term* node);

  double term_uncached(const Term* node, double t);
  bool sat_uncached(const Formula* node, double t);
  double rho_uncached(const Formula* node, double t);

  const Trace& trace_;
  std::unordered_map<Key, double, KeyHash> term_memo_;
  std::unordered_map<Key, char, KeyHash> sat_memo_;
  std::unordered_map<Key, double, KeyHash> rho_memo_;
  std::unordered_map<const void*, WinCache> win_term_;
  std::unordered_map<const void*, WinCache> win_sat_;
  std::unordered_map<const void*, WinCache> win_rho_;
  std::unordered_map<const Term*, int> signals_;
};

// Batched sliding-window aggregate evaluation at strictly increasing query
// times (throws std::invalid_argument otherwise). Results are identical to
// evaluating the aggregate independently at each query time.
std::vector<double> sliding_aggregate(Builder& builder, bool take_max, const TermPtr& subject,
                                      Interval window, const Trace& trace,
                                      std::span<const double> query_times);

std::vector<char> sliding_aggregate_bool(Builder& builder, bool is_forall,
                                         const FormulaPtr& subject, Interval window,
                                         const Trace& trace,
                                         std::span<const double> query_times);

std::vector<double> sliding_aggregate_robust(Builder& builder, bool is_forall,
                                             const FormulaPtr& subject, Interval window,
                                             const Trace& trace,
                                             std::span<const double> query_times);

}  // namespace quadsim::stl
