#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "quadsim/queries.hpp"

using namespace quadsim;

TEST_CASE("easy-class samples respect the declared supports") {
  Rng rng(41);
  const QueryClass easy = QueryClass::easy();
  const QuerySignal q = sample_query(easy, 20.0, rng);
  for (const auto& ax : q.axes) {
    REQUIRE(ax.count() >= 1);
    CHECK(ax.start.front() == 0.0);
    double prev_value = 0.0;
    for (std::size_t i = 0; i < ax.count(); ++i) {
      CHECK(std::abs(ax.value[i]) <= 0.2);
      CHECK(std::abs(ax.value[i] - prev_value) <= 0.3);
      if (i + 1 < ax.count()) {
        const double dur = ax.start[i + 1] - ax.start[i];
        CHECK(dur >= 0.5);
        CHECK(dur <= 0.8);
      }
      prev_value = ax.value[i];
    }
  }
}

TEST_CASE("hard class over 20s yields 100..200 plateaus per axis") {
  Rng rng(42);
  const QuerySignal q = sample_query(QueryClass::hard(), 20.0, rng);
  for (const auto& ax : q.axes) {
    CHECK(ax.count() >= 100);
    CHECK(ax.count() <= 200);
  }
}

TEST_CASE("support coverage over many plateaus") {
  Rng rng(43);
  const QueryClass cls = QueryClass::medium();
  double amp_min = 1e9, amp_max = -1e9, dur_min = 1e9, dur_max = -1e9, step_min = 1e9,
         step_max = -1e9;
  int plateaus = 0;
  while (plateaus < 10000) {
    const QuerySignal q = sample_query(cls, 20.0, rng);
    for (const auto& ax : q.axes) {
      double prev = 0.0;
      for (std::size_t i = 0; i < ax.count(); ++i) {
        amp_min = std::min(amp_min, ax.value[i]);
        amp_max = std::max(amp_max, ax.value[i]);
        step_min = std::min(step_min, std::abs(ax.value[i] - prev));
        step_max = std::max(step_max, std::abs(ax.value[i] - prev));
        if (i + 1 < ax.count()) {
          dur_min = std::min(dur_min, ax.start[i + 1] - ax.start[i]);
          dur_max = std::max(dur_max, ax.start[i + 1] - ax.start[i]);
        }
        prev = ax.value[i];
        ++plateaus;
      }
    }
  }
  // Inside the supports and covering at least 95% of them.
  CHECK(amp_min >= -0.4);
  CHECK(amp_max <= 0.4);
  CHECK(amp_min <= -0.4 + 0.05 * 0.8);
  CHECK(amp_max >= 0.4 - 0.05 * 0.8);
  CHECK(dur_min >= 0.2);
  CHECK(dur_max <= 0.5);
  CHECK(dur_min <= 0.2 + 0.05 * 0.3);
  CHECK(dur_max >= 0.5 - 0.05 * 0.3);
  CHECK(step_max <= 0.6);
  CHECK(step_min <= 0.05 * 0.6);
  CHECK(step_max >= 0.6 - 0.05 * 0.6);
}

TEST_CASE("same seed reproduces the signal exactly") {
  Rng a(44), b(44);
  const QuerySignal qa = sample_query(QueryClass::medium(), 20.0, a);
  const QuerySignal qb = sample_query(QueryClass::medium(), 20.0, b);
  for (int axis = 0; axis < 3; ++axis) {
    REQUIRE(qa.axes[axis].count() == qb.axes[axis].count());
    for (std::size_t i = 0; i < qa.axes[axis].count(); ++i) {
      CHECK(qa.axes[axis].start[i] == qb.axes[axis].start[i]);
      CHECK(qa.axes[axis].value[i] == qb.axes[axis].value[i]);
    }
  }
}

TEST_CASE("training queries are one plateau then zero") {
  Rng rng(45);
  for (int i = 0; i < 100; ++i) {
    const QuerySignal q = sample_training_query(1.0, rng);
    for (const auto& ax : q.axes) {
      REQUIRE(ax.count() >= 1);
      CHECK(ax.count() <= 2);
      CHECK(std::abs(ax.value.front()) <= 0.6);
      if (ax.count() == 2) {
        CHECK(ax.value.back() == 0.0);
        CHECK(ax.start.back() >= 0.1);
        CHECK(ax.start.back() <= 1.0);
      }
    }
  }
}

TEST_CASE("singularity filter keeps the integrated angle bounded") {
  // A class aggressive enough to break pi/2 quickly without the filter.
  const QueryClass aggressive{{-0.6, 0.6}, {3.0, 4.0}, {0.0, 1.2}};
  Rng rng(46);
  for (int i = 0; i < 50; ++i) {
    const QuerySignal q = sample_query(aggressive, 30.0, rng);
    for (int axis = 0; axis < 2; ++axis) {  // roll and pitch only
      const auto& ax = q.axes[axis];
      double angle = 0.0;
      for (std::size_t k = 0; k < ax.count(); ++k) {
        const double end = k + 1 < ax.count() ? ax.start[k + 1] : 30.0;
        angle += ax.value[k] * (end - ax.start[k]);
        CHECK(std::abs(angle) <= M_PI_2 - 0.2 + 1e-9);
      }
    }
  }
}

TEST_CASE("infeasible constraints raise a generation error") {
  // First plateau must satisfy |value| >= 0.9 but also |value - 0| <= 0.05.
  const QueryClass impossible{{0.9, 1.0}, {0.5, 1.0}, {0.0, 0.05}};
  Rng rng(47);
  CHECK_THROWS_AS(sample_query(impossible, 5.0, rng), QueryGenerationError);
}

TEST_CASE("query trace matches the plateau representation") {
  Rng rng(48);
  const QuerySignal q = sample_query(QueryClass::medium(), 10.0, rng);
  const stl::Trace tr = q.to_trace();
  for (double t : {0.0, 0.105, 1.0, 3.33, 7.77, 9.999}) {
    CHECK(tr.value(0, t) == q.axes[0].value_at(t));
    CHECK(tr.value(1, t) == q.axes[1].value_at(t));
    CHECK(tr.value(2, t) == q.axes[2].value_at(t));
  }
  CHECK(tr.value(0, -1.0) == 0.0);
}

TEST_CASE("reward clipping and linear region") {
  const RewardParams prm{0.6};
  QuadState s;
  s.p = 0.1;
  s.q = -0.2;
  s.r = 0.05;
  CHECK(reward(s, Vec3(0.1, -0.2, 0.05), prm) == 0.0);

  QuadState far;
  far.p = 10.0;
  CHECK(reward(far, Vec3::Zero(), prm) == -1.0);

  // Distance of exactly 1.5 * omega_max sits at -0.5.
  QuadState mid;
  mid.p = 1.5 * prm.omega_max;
  CHECK(reward(mid, Vec3::Zero(), prm) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("reward is non-positive and 1-Lipschitz in the normalized distance") {
  const RewardParams prm{0.6};
  Rng rng(49);
  for (int i = 0; i < 500; ++i) {
    QuadState a, b;
    a.p = rng.uniform(-2, 2);
    a.q = rng.uniform(-2, 2);
    a.r = rng.uniform(-2, 2);
    b.p = rng.uniform(-2, 2);
    b.q = rng.uniform(-2, 2);
    b.r = rng.uniform(-2, 2);
    const Vec3 sp(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
    const double ra = reward(a, sp, prm);
    const double rb = reward(b, sp, prm);
    CHECK(ra <= 0.0);
    const double dist =
        (Vec3(a.p, a.q, a.r) - Vec3(b.p, b.q, b.r)).norm() / (3.0 * prm.omega_max);
    CHECK(std::abs(ra - rb) <= dist + 1e-12);
  }
}
