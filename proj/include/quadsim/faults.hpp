#pragma once

#include <optional>
#include <span>

#include "quadsim/dynamics.hpp"
#include "quadsim/rng.hpp"

namespace quadsim {

// Partial power loss on one motor, modeled as a cap on its maximum PWM.
struct MotorFailure {
  double factor = 1.0;      // in [0.8, 1.0]
  int affected_motor = 1;   // 1-based

  void validate() const;
};

// Deterministic discrete wind gust: half-cosine profile of peak magnitude
// `peak` along the fixed unit direction `direction`, active on
// [onset, onset + 2 * half_life].
struct GustSpec {
  double peak = 0.0;        // m/s
  double half_life = 1.0;   // s
  double onset = 0.0;       // s
  Vec3 direction{1.0, 0.0, 0.0};

  void validate() const;
  bool active(double t) const { return peak > 0.0 && t >= onset && t <= onset + 2.0 * half_life; }
};

// Clamp every motor to [0, p_max]; additionally clamp the failed motor to
// [0, factor * p_max]. Idempotent and monotone.
Pwm4 apply_saturation(const Pwm4& pwm, const std::optional<MotorFailure>& failure,
                      const QuadParams& params);

// Absolute wind velocity at time t, zero outside the active interval.
Vec3 gust_velocity(double t, const GustSpec& gust);

struct GustSampling {
  double magnitude_cap = 10.0;   // m/s
  double half_life_min = 0.5;    // s
  double half_life_max = 2.0;    // s
};

// Peak uniform in [0, cap], direction uniform on the unit sphere, half-life
// uniform in its range, onset drawn from the candidate instants (plateau
// starts); onset 0 when no candidates are given.
GustSpec sample_gust(Rng& rng, const GustSampling& sampling,
                     std::span<const double> onset_candidates = {});

}  // namespace quadsim
