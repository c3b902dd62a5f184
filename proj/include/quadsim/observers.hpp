#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quadsim/stl/ast.hpp"
#include "quadsim/stl/trace.hpp"

namespace quadsim {

// Step-response property parameters.
struct ObserverParams {
  double alpha = 0.10;    // overshoot fraction of the step size
  double beta = 0.05;     // offset fraction of the step size
  double gamma = 0.05;    // rising-time fraction of the query value
  double T = 0.5;         // stability window (s)
  double T1 = 0.25;       // overshoot window (s)
  double epsilon = 0.01;  // lookback (s)
  double band = 0.005;    // stability band (rad/s)

  void validate() const;
};

// The behavioral properties as formulas/terms over two signals named
// "x" (response) and "q" (query).
struct ObserverSet {
  std::shared_ptr<stl::Builder> builder;
  stl::FormulaPtr stable;
  stl::FormulaPtr becomes_stable;
  stl::FormulaPtr up;
  stl::FormulaPtr down;
  stl::TermPtr step_size;
  stl::TermPtr rising_time;
  stl::FormulaPtr overshoot_up;
  stl::FormulaPtr overshoot_down;
  stl::FormulaPtr offset;
  // Episode-level wrappers: G[0, episode_length] of each property.
  stl::FormulaPtr g_overshoot_up;
  stl::FormulaPtr g_overshoot_down;
  stl::FormulaPtr g_offset;
};

ObserverSet build_observers(const ObserverParams& params, double episode_length);

// One evaluated plateau (per-plateau detail rows).
struct PlateauRecord {
  int axis = 0;
  double start = 0.0;
  double end = 0.0;
  double value = 0.0;  // query plateau value
  double step = 0.0;   // value - previous plateau value
  bool overshoot_evaluated = false;
  bool overshoot_ok = false;
  double overshoot_pct = 0.0;
  bool offset_evaluated = false;
  bool offset_ok = false;
  double offset_pct = 0.0;
  bool rising_reached = false;
  double rising_time = 0.0;  // valid when reached
};

struct AxisMetrics {
  int plateaus = 0;
  int overshoot_evaluated = 0;
  int overshoot_ok = 0;
  double overshoot_pct_sum = 0.0;
  double overshoot_pct_max = 0.0;
  int offset_evaluated = 0;
  int offset_ok = 0;
  double offset_pct_sum = 0.0;
  double offset_pct_max = 0.0;
  int rising_reached = 0;
  double rising_sum = 0.0;
  double rising_max = 0.0;

  void absorb(const AxisMetrics& other);

  std::optional<double> ok_overshoot_pct() const;
  std::optional<double> avg_overshoot_pct() const;
  std::optional<double> max_overshoot_pct() const;
  std::optional<double> ok_offset_pct() const;
  std::optional<double> avg_offset_pct() const;
  std::optional<double> max_offset_pct() const;
  std::optional<double> ok_rising_pct() const;  // reached / plateaus
  std::optional<double> avg_rising() const;     // over reached plateaus only
  std::optional<double> max_rising() const;
};

struct EpisodeMetrics {
  std::array<AxisMetrics, 3> axis{};
  AxisMetrics pooled{};
  std::vector<PlateauRecord> detail;

  bool empty() const { return pooled.plateaus == 0; }
};

struct AxisSignals {
  std::string response;
  std::string query;
};

inline std::vector<AxisSignals> default_axis_signals() {
  return {{"p", "p_sp"}, {"q", "q_sp"}, {"r", "r_sp"}};
}

// Detect plateau starts on each query channel (steps of at least `band`,
// including a step from the default at the first breakpoint), then score
// every plateau:
//   overshoot  peak signed excursion beyond the query on [0, T1], truncated
//              at the next plateau start; OK iff < alpha * |step|
//   offset     max |x - q| on [T1, T], truncated likewise; skipped when the
//              plateau is shorter than T1
//   rising     first instant in [0, T] (not truncated) with |x - q| < gamma*|q|
// Strict inequalities throughout; ties count as failures.
EpisodeMetrics episode_metrics(const stl::Trace& episode, const ObserverParams& params,
                               const std::vector<AxisSignals>& axes = default_axis_signals());

// Run-level report: per-episode averages of the per-episode statistics,
// over the episodes where each statistic is defined.
struct RunReport {
  int episodes = 0;
  int episodes_with_plateaus = 0;
  std::optional<double> ok_rising, ok_offset, ok_overshoot;
  std::optional<double> avg_rising, avg_offset, avg_overshoot;
  std::optional<double> max_rising, max_offset, max_overshoot;
};

RunReport aggregate_runs(std::span<const EpisodeMetrics> episodes);

extern const char* const kMetricsCsvHeader;

void write_metrics_csv(std::ostream& out, const std::string& label, const RunReport& report);
void write_episode_metrics_csv(std::ostream& out, std::span<const EpisodeMetrics> episodes);
void write_plateau_detail_csv(std::ostream& out, std::span<const EpisodeMetrics> episodes);

}  // namespace quadsim
