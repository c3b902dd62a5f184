#include "quadsim/faults.hpp"

#include <algorithm>
#include <cmath>

namespace quadsim {

void MotorFailure::validate() const {
  if (!(factor >= 0.8 && factor <= 1.0))
    throw SimulationFault("MotorFailure: factor must lie in [0.8, 1.0]");
  if (affected_motor < 1 || affected_motor > 4)
    throw SimulationFault("MotorFailure: motor index must be in 1..4");
}

void GustSpec::validate() const {
  if (!(peak >= 0.0)) throw SimulationFault("GustSpec: peak must be >= 0");
  if (!(half_life > 0.0)) throw SimulationFault("GustSpec: half_life must be > 0");
  if (std::abs(direction.norm() - 1.0) > 1e-9)
    throw SimulationFault("GustSpec: direction must be a unit vector");
}

Pwm4 apply_saturation(const Pwm4& pwm, const std::optional<MotorFailure>& failure,
                      const QuadParams& params) {
  Pwm4 out = pwm.cwiseMax(0.0).cwiseMin(params.p_max);
  if (failure) {
    failure->validate();
    const int i = failure->affected_motor - 1;
    out[i] = std::min(out[i], failure->factor * params.p_max);
  }
  return out;
}

Vec3 gust_velocity(double t, const GustSpec& gust) {
  if (t < gust.onset || t > gust.onset + 2.0 * gust.half_life) return Vec3::Zero();
  const double phase = M_PI * (t - gust.onset) / gust.half_life;
  return (gust.peak / 2.0) * (1.0 - std::cos(phase)) * gust.direction;
}

GustSpec sample_gust(Rng& rng, const GustSampling& sampling,
                     std::span<const double> onset_candidates) {
  GustSpec g;
  g.peak = rng.uniform(0.0, sampling.magnitude_cap);
  g.half_life = rng.uniform(sampling.half_life_min, sampling.half_life_max);
  // Uniform direction on the unit sphere.
  const double zc = rng.uniform(-1.0, 1.0);
  const double az = rng.uniform(0.0, 2.0 * M_PI);
  const double rho = std::sqrt(std::max(0.0, 1.0 - zc * zc));
  g.direction = Vec3(rho * std::cos(az), rho * std::sin(az), zc).normalized();
  g.onset = onset_candidates.empty()
                ? 0.0
                : onset_candidates[rng.integer(onset_candidates.size())];
  g.validate();
  return g;
}

}  // namespace quadsim
