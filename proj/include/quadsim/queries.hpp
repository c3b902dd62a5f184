#pragma once

#include <array>
#include <string>
#include <vector>

#include "quadsim/dynamics.hpp"
#include "quadsim/rng.hpp"
#include "quadsim/stl/trace.hpp"

namespace quadsim {

class QueryGenerationError : public std::runtime_error {
 public:
  explicit QueryGenerationError(const std::string& what) : std::runtime_error(what) {}
};

struct UniformSupport {
  double lo = 0.0;
  double hi = 0.0;
  double sample(Rng& rng) const { return rng.uniform(lo, hi); }
  bool contains(double v) const { return v >= lo && v <= hi; }
};

// Distributions for plateau amplitude, plateau duration, and the step between
// successive plateaus. Shared by the three axes.
struct QueryClass {
  UniformSupport amplitude;
  UniformSupport duration;
  UniformSupport step;

  static QueryClass easy() { return {{-0.2, 0.2}, {0.5, 0.8}, {0.0, 0.3}}; }
  static QueryClass medium() { return {{-0.4, 0.4}, {0.2, 0.5}, {0.0, 0.6}}; }
  static QueryClass hard() { return {{-0.6, 0.6}, {0.1, 0.2}, {0.0, 0.9}}; }
  static QueryClass from_name(const std::string& name);
};

struct AxisPlateaus {
  std::vector<double> start;  // strictly increasing, first at 0
  std::vector<double> value;

  double value_at(double t) const;
  std::size_t count() const { return start.size(); }
};

// Piecewise-constant angular-rate setpoints for the three axes (p, q, r),
// default 0 before time 0.
struct QuerySignal {
  std::array<AxisPlateaus, 3> axes;
  double horizon = 0.0;

  Vec3 value(double t) const {
    return Vec3(axes[0].value_at(t), axes[1].value_at(t), axes[2].value_at(t));
  }
  // Trace with signals (p_sp, q_sp, r_sp); breakpoints at plateau starts.
  stl::Trace to_trace() const;
  // Plateau-start instants pooled over the three axes, sorted, deduplicated.
  std::vector<double> plateau_starts() const;
};

struct QueryGenLimits {
  int max_rejections = 1000;
  // Reject plateaus whose integrated roll/pitch estimate would leave
  // [-(pi/2 - margin), pi/2 - margin].
  double angle_margin = 0.2;
};

// Independent per-axis plateau sequences covering [0, horizon]. Successive
// plateaus respect the amplitude support, the step support (by rejection),
// and the Euler-angle singularity filter.
QuerySignal sample_query(const QueryClass& cls, double horizon, Rng& rng,
                         const QueryGenLimits& limits = {});

// Training-style episode: per axis one plateau of random amplitude and
// duration, followed by 0 until the end of the episode.
QuerySignal sample_training_query(double horizon, Rng& rng);

struct RewardParams {
  double omega_max = 0.6;  // rad/s
};

// Clipped negative normalized distance between the angular-rate vector and
// its setpoint; in [-1, 0], 0 iff tracking is exact.
double reward(const QuadState& state, const Vec3& setpoint, const RewardParams& params);

}  // namespace quadsim
