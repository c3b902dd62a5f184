#include "quadsim/queries.hpp"

#include <algorithm>
#include <cmath>

namespace quadsim {

QueryClass QueryClass::from_name(const std::string& name) {
  if (name == "easy") return easy();
  if (name == "medium") return medium();
  if (name == "hard") return hard();
  throw QueryGenerationError("unknown query class: " + name);
}

double AxisPlateaus::value_at(double t) const {
  if (start.empty() || t < start.front()) return 0.0;
  const auto it = std::upper_bound(start.begin(), start.end(), t);
  return value[(it - start.begin()) - 1];
}

stl::Trace QuerySignal::to_trace() const {
  stl::Trace tr({"p_sp", "q_sp", "r_sp"}, {0.0, 0.0, 0.0});
  for (double t : plateau_starts())
    tr.add_breakpoint(t, std::array{axes[0].value_at(t), axes[1].value_at(t), axes[2].value_at(t)});
  return tr;
}

std::vector<double> QuerySignal::plateau_starts() const {
  std::vector<double> ts;
  for (const auto& ax : axes) ts.insert(ts.end(), ax.start.begin(), ax.start.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

namespace {

// Roll integrates the p query, pitch the q query; yaw has no singularity.
// axis: 0 -> roll bound, 1 -> pitch bound, 2 -> unconstrained.
AxisPlateaus sample_axis(const QueryClass& cls, double horizon, Rng& rng,
                         const QueryGenLimits& limits, bool angle_bounded) {
  const double angle_bound = M_PI_2 - limits.angle_margin;
  AxisPlateaus out;
  double t = 0.0;
  double prev_value = 0.0;
  double angle_estimate = 0.0;
  while (t < horizon) {
    const double dur = cls.duration.sample(rng);
    double val = 0.0;
    bool accepted = false;
    for (int attempt = 0; attempt < limits.max_rejections; ++attempt) {
      val = cls.amplitude.sample(rng);
      if (!cls.step.contains(std::abs(val - prev_value))) continue;
      if (angle_bounded) {
        const double projected = angle_estimate + val * std::min(dur, horizon - t);
        if (std::abs(projected) > angle_bound) continue;
      }
      accepted = true;
      break;
    }
    if (!accepted)
      throw QueryGenerationError("query generation exceeded the rejection cap");
    out.start.push_back(t);
    out.value.push_back(val);
    if (angle_bounded) angle_estimate += val * std::min(dur, horizon - t);
    prev_value = val;
    t += dur;
  }
  return out;
}

}  // namespace

QuerySignal sample_query(const QueryClass& cls, double horizon, Rng& rng,
                         const QueryGenLimits& limits) {
  if (!(horizon > 0.0)) throw QueryGenerationError("horizon must be positive");
  QuerySignal q;
  q.horizon = horizon;
  for (int axis = 0; axis < 3; ++axis)
    q.axes[axis] = sample_axis(cls, horizon, rng, limits, axis < 2);
  return q;
}

QuerySignal sample_training_query(double horizon, Rng& rng) {
  if (!(horizon > 0.0)) throw QueryGenerationError("horizon must be positive");
  QuerySignal q;
  q.horizon = horizon;
  for (int axis = 0; axis < 3; ++axis) {
    const double amp = rng.uniform(-0.6, 0.6);
    const double dur = rng.uniform(0.1, 1.0);
    auto& ax = q.axes[axis];
    ax.start = {0.0};
    ax.value = {amp};
    if (dur < horizon) {
      ax.start.push_back(dur);
      ax.value.push_back(0.0);
    }
  }
  return q;
}

double reward(const QuadState& state, const Vec3& setpoint, const RewardParams& params) {
  const Vec3 rates(state.p, state.q, state.r);
  const double dist = (setpoint - rates).norm();
  return -std::min(1.0, dist / (3.0 * params.omega_max));
}

}  // namespace quadsim
