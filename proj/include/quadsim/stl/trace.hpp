#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace quadsim::stl {

class TraceError : public std::runtime_error {
 public:
  explicit TraceError(const std::string& what) : std::runtime_error(what) {}
};

// Total piecewise-constant function over a tuple of named signals, defined by
// strictly increasing breakpoints plus a default tuple:
//   value(t) = default            for t < t_0
//   value(t) = X_j                for t in [t_j, t_{j+1})
//   value(t) = X_{M-1}            for t >= t_{M-1}
class Trace {
 public:
  Trace(std::vector<std::string> names, std::vector<double> defaults);

  void add_breakpoint(double t, std::span<const double> values);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t signal_count() const { return names_.size(); }
  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  std::span<const double> times() const { return times_; }
  std::span<const double> column(int signal) const { return columns_[signal]; }
  double default_value(int signal) const { return defaults_[signal]; }

  // -1 when the name is unknown.
  int signal_index(const std::string& name) const;

  double value(int signal, double t) const;
  double value_at(int signal, std::size_t breakpoint_index) const {
    return columns_[signal][breakpoint_index];
  }

  // Index of the first breakpoint with time >= t (== size() when none).
  std::size_t first_at_or_after(double t) const;
  // Index of the first breakpoint with time > t.
  std::size_t first_after(double t) const;

  // Enumerate the evaluation grid of the window [lo, hi]: the point lo
  // itself, then every breakpoint in (lo, hi]. This makes window semantics
  // total on piecewise-constant traces even when no breakpoint falls inside.
  // Calls fn(t) for each grid point in increasing order; if fn returns false
  // the enumeration stops early. Windows with hi < lo are normalized.
  template <class Fn>
  void for_grid(double lo, double hi, Fn&& fn) const {
    if (hi < lo) std::swap(lo, hi);
    if (!fn(lo)) return;
    for (std::size_t i = first_after(lo); i < times_.size() && times_[i] <= hi; ++i)
      if (!fn(times_[i])) return;
  }

  // CSV with header `time,<signal...>`, an optional `default,...` directive
  // row, then one row per breakpoint.
  static Trace read_csv(std::istream& in);
  static Trace read_csv_file(const std::filesystem::path& path);
  void write_csv(std::ostream& out) const;
  void write_csv_file(const std::filesystem::path& path) const;

  // New trace holding a subset of signals (optionally renamed).
  Trace select(const std::vector<std::string>& signal_names,
               const std::vector<std::string>& new_names = {}) const;

 private:
  std::vector<std::string> names_;
  std::vector<double> defaults_;
  std::vector<double> times_;
  std::vector<std::vector<double>> columns_;  // per signal
};

}  // namespace quadsim::stl
