#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <sstream>

#include "quadsim/observers.hpp"
#include "quadsim/rng.hpp"
#include "quadsim/stl/eval.hpp"

using namespace quadsim;
namespace qstl = quadsim::stl;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Build an (x, q) trace on a 0.01 s grid from callables, plus a matching
// 6-signal episode trace where only the q axis responds.
qstl::Trace xq_trace(double t_end, const std::function<double(double)>& x,
                     const std::function<double(double)>& q) {
  qstl::Trace tr({"x", "q"}, {0.0, 0.0});
  const long n = std::lround(t_end / 0.01);
  for (long i = 0; i <= n; ++i) {
    const double t = i * 0.01;
    tr.add_breakpoint(t, std::array{x(t), q(t)});
  }
  return tr;
}

qstl::Trace episode_from_xq(const qstl::Trace& xq) {
  qstl::Trace tr({"p", "q", "r", "p_sp", "q_sp", "r_sp"}, {0, 0, 0, 0, 0, 0});
  for (std::size_t j = 0; j < xq.size(); ++j) {
    const double x = xq.value_at(0, j);
    const double q = xq.value_at(1, j);
    tr.add_breakpoint(xq.times()[j], std::array{x, 0.0, 0.0, q, 0.0, 0.0});
  }
  return tr;
}

const ObserverParams kPrm{};

}  // namespace

TEST_CASE("perfect tracking: zero overshoot, zero offset, zero rising time") {
  const auto q = [](double t) { return t < 1.0 ? 0.0 : 0.5; };
  const qstl::Trace tr = xq_trace(3.0, q, q);
  const EpisodeMetrics m = episode_metrics(episode_from_xq(tr), kPrm);

  REQUIRE(m.axis[0].plateaus == 1);
  CHECK(m.pooled.plateaus == 1);
  CHECK(m.axis[0].overshoot_ok == 1);
  CHECK(*m.axis[0].avg_overshoot_pct() == doctest::Approx(0.0));
  CHECK(m.axis[0].offset_ok == 1);
  CHECK(*m.axis[0].avg_offset_pct() == doctest::Approx(0.0));
  CHECK(m.axis[0].rising_reached == 1);
  CHECK(*m.axis[0].avg_rising() == doctest::Approx(0.0));

  // STL-native route agrees at the step instant.
  const ObserverSet obs = build_observers(kPrm, 3.0);
  qstl::Evaluator ev(tr);
  CHECK(ev.sat(obs.becomes_stable, 1.0));
  CHECK_FALSE(ev.sat(obs.becomes_stable, 1.5));
  CHECK(ev.term(obs.step_size, 1.0) == doctest::Approx(0.5));
  CHECK(ev.term(obs.step_size, 1.37) == 0.0);
  CHECK(ev.sat(obs.up, 1.0));
  CHECK(ev.rho(obs.overshoot_up, 1.0) > 0.0);
  CHECK(ev.rho(obs.offset, 1.0) > 0.0);
  CHECK(ev.term(obs.rising_time, 1.0) == 0.0);
  CHECK(ev.term(obs.rising_time, 1.5) == kInf);  // not a becomes-stable instant
}

TEST_CASE("first-order response: frozen rising time and offset") {
  // x(t) = q * (1 - exp(-(t-1)/tau)), tau = 0.05, step 0 -> 0.5 at t = 1.
  const double tau = 0.05;
  const auto q = [](double t) { return t < 1.0 ? 0.0 : 0.5; };
  const auto x = [&](double t) { return t < 1.0 ? 0.0 : 0.5 * (1.0 - std::exp(-(t - 1.0) / tau)); };
  const qstl::Trace tr = xq_trace(3.0, x, q);
  const EpisodeMetrics m = episode_metrics(episode_from_xq(tr), kPrm);

  REQUIRE(m.axis[0].plateaus == 1);
  // First grid point with exp(-(t-1)/0.05) < 0.05 is t = 1.15.
  CHECK(m.axis[0].rising_reached == 1);
  CHECK(*m.axis[0].avg_rising() == doctest::Approx(0.15).epsilon(1e-9));
  // Monotone approach from below never overshoots.
  CHECK(*m.axis[0].avg_overshoot_pct() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(m.axis[0].overshoot_ok == 1);
  // Offset window [T1, T]: the peak deviation sits at T1 = 0.25 exactly,
  // 100 * exp(-0.25/0.05) percent of the step.
  CHECK(*m.axis[0].avg_offset_pct() == doctest::Approx(100.0 * std::exp(-5.0)).epsilon(1e-9));
  CHECK(m.axis[0].offset_ok == 1);  // e^-5 = 0.67% < 5%

  const ObserverSet obs = build_observers(kPrm, 3.0);
  qstl::Evaluator ev(tr);
  CHECK(ev.term(obs.rising_time, 1.0) == doctest::Approx(0.15).epsilon(1e-9));
  CHECK(ev.rho(obs.g_offset, 0.0) > 0.0);
}

TEST_CASE("12% overshoot pulse: OK at alpha=15%, not at 10%") {
  const double step = 0.5;
  const auto q = [&](double t) { return t < 1.0 ? 0.0 : step; };
  const auto x = [&](double t) {
    if (t < 1.0) return 0.0;
    if (t >= 1.05 && t <= 1.10) return step + 0.12 * step;  // the pulse
    return step;
  };
  const qstl::Trace tr = xq_trace(3.0, x, q);

  const EpisodeMetrics strict = episode_metrics(episode_from_xq(tr), kPrm);
  REQUIRE(strict.axis[0].plateaus == 1);
  CHECK(*strict.axis[0].max_overshoot_pct() == doctest::Approx(12.0).epsilon(1e-9));
  CHECK(strict.axis[0].overshoot_ok == 0);

  ObserverParams loose = kPrm;
  loose.alpha = 0.15;
  const EpisodeMetrics ok = episode_metrics(episode_from_xq(tr), loose);
  CHECK(ok.axis[0].overshoot_ok == 1);

  const ObserverSet obs_strict = build_observers(kPrm, 3.0);
  const ObserverSet obs_loose = build_observers(loose, 3.0);
  qstl::Evaluator e1(tr), e2(tr);
  CHECK(e1.rho(obs_strict.overshoot_up, 1.0) < 0.0);
  CHECK(e2.rho(obs_loose.overshoot_up, 1.0) > 0.0);
  CHECK(e1.rho(obs_strict.g_overshoot_up, 0.0) < 0.0);
}

TEST_CASE("step size is zero away from becomes-stable instants; up/down partition") {
  Rng rng(61);
  // Random staircase with occasional steps.
  qstl::Trace tr({"x", "q"}, {0.0, 0.0});
  double q = 0.3;
  for (long i = 0; i <= 600; ++i) {
    const double t = i * 0.01;
    if (i > 0 && i % 70 == 0) q += rng.uniform(-0.4, 0.4);
    tr.add_breakpoint(t, std::array{q, q});
  }
  const ObserverSet obs = build_observers(kPrm, 6.0);
  qstl::Evaluator ev(tr);
  for (long i = 0; i < 600; ++i) {
    const double t = i * 0.01;
    const bool bs = ev.sat(obs.becomes_stable, t);
    if (!bs) {
      CHECK(ev.term(obs.step_size, t) == 0.0);
    } else {
      CHECK((ev.sat(obs.up, t) || ev.sat(obs.down, t)));
      CHECK(ev.sat(obs.up, t) != ev.sat(obs.down, t));
    }
  }
}

TEST_CASE("rising time is +inf exactly when the band is never reached") {
  const auto q = [](double t) { return t < 1.0 ? 0.0 : 0.5; };
  const auto x_never = [](double) { return 0.0; };  // never approaches q
  const qstl::Trace tr = xq_trace(2.0, x_never, q);
  const ObserverSet obs = build_observers(kPrm, 2.0);
  qstl::Evaluator ev(tr);
  CHECK(ev.term(obs.rising_time, 1.0) == kInf);
  const EpisodeMetrics m = episode_metrics(episode_from_xq(tr), kPrm);
  CHECK(m.axis[0].rising_reached == 0);
  CHECK(*m.axis[0].ok_rising_pct() == 0.0);
  CHECK_FALSE(m.axis[0].avg_rising().has_value());
}

TEST_CASE("metrics are invariant under joint positive scaling") {
  Rng rng(62);
  const auto q = [](double t) { return t < 0.7 ? 0.1 : -0.35; };
  const auto x = [&](double t) {
    return q(t) + 0.02 * std::sin(25.0 * t);
  };
  const qstl::Trace tr = xq_trace(2.0, x, q);

  const double c = 3.7;
  const auto qs = [&](double t) { return c * q(t); };
  const auto xs = [&](double t) { return c * x(t); };
  const qstl::Trace scaled = xq_trace(2.0, xs, qs);

  ObserverParams scaled_prm = kPrm;
  scaled_prm.band = kPrm.band * c;
  const EpisodeMetrics a = episode_metrics(episode_from_xq(tr), kPrm);
  const EpisodeMetrics b = episode_metrics(episode_from_xq(scaled), scaled_prm);
  REQUIRE(a.pooled.plateaus == b.pooled.plateaus);
  CHECK(a.pooled.overshoot_ok == b.pooled.overshoot_ok);
  CHECK(a.pooled.offset_ok == b.pooled.offset_ok);
  CHECK(a.pooled.rising_reached == b.pooled.rising_reached);
  if (a.pooled.avg_overshoot_pct())
    CHECK(*a.pooled.avg_overshoot_pct() == doctest::Approx(*b.pooled.avg_overshoot_pct()));
}

TEST_CASE("empty metrics are marked empty, not zero") {
  const auto flat = [](double) { return 0.0; };
  const qstl::Trace tr = xq_trace(1.0, flat, flat);
  const EpisodeMetrics m = episode_metrics(episode_from_xq(tr), kPrm);
  CHECK(m.empty());
  CHECK_FALSE(m.pooled.ok_rising_pct().has_value());
  CHECK_FALSE(m.pooled.avg_overshoot_pct().has_value());
}

TEST_CASE("two plateaus with one offset violation gives 50% OK") {
  // Plateau 1 tracks perfectly; plateau 2 keeps a 10% offset.
  const auto q = [](double t) { return t < 2.0 ? 0.5 : 1.0; };
  const auto x = [](double t) { return t < 2.0 ? 0.5 : 0.95; };  // |x-q|=0.05 = 10% of step
  const qstl::Trace tr = xq_trace(4.0, x, q);
  const EpisodeMetrics m = episode_metrics(episode_from_xq(tr), kPrm);
  REQUIRE(m.axis[0].plateaus == 2);
  CHECK(m.axis[0].offset_evaluated == 2);
  CHECK(m.axis[0].offset_ok == 1);
  CHECK(*m.axis[0].ok_offset_pct() == doctest::Approx(50.0));
}

TEST_CASE("aggregate_runs basics and a recomputation oracle") {
  const auto q = [](double t) { return t < 1.0 ? 0.0 : 0.5; };
  const qstl::Trace tr = xq_trace(3.0, q, q);
  const EpisodeMetrics one = episode_metrics(episode_from_xq(tr), kPrm);

  // Identical episodes aggregate to the single-episode values.
  std::vector<EpisodeMetrics> same(5, one);
  const RunReport rep = aggregate_runs(same);
  CHECK(rep.episodes == 5);
  CHECK(*rep.ok_rising == *one.pooled.ok_rising_pct());
  CHECK(*rep.avg_overshoot == *one.pooled.avg_overshoot_pct());

  // 0% and 100% offset-OK episodes average to 50%.
  const auto x_bad = [](double t) { return t < 1.0 ? 0.0 : 0.4; };
  const qstl::Trace bad_tr = xq_trace(3.0, x_bad, q);
  const EpisodeMetrics bad = episode_metrics(episode_from_xq(bad_tr), kPrm);
  CHECK(*bad.pooled.ok_offset_pct() == 0.0);
  std::vector<EpisodeMetrics> mixed{one, bad};
  CHECK(*aggregate_runs(mixed).ok_offset == doctest::Approx(50.0));

  // Randomized corpus vs an independent mean computed here.
  Rng rng(63);
  std::vector<EpisodeMetrics> corpus;
  double mean_ok = 0.0;
  int n_ok = 0;
  for (int i = 0; i < 100; ++i) {
    const double level = rng.uniform(0.3, 0.6);
    const double miss = rng.uniform(0.0, 0.1);
    const auto qq = [&](double t) { return t < 1.0 ? 0.0 : level; };
    const auto xx = [&](double t) { return t < 1.0 ? 0.0 : level - miss; };
    corpus.push_back(episode_metrics(episode_from_xq(xq_trace(2.5, xx, qq)), kPrm));
    const auto v = corpus.back().pooled.ok_offset_pct();
    if (v) {
      mean_ok += *v;
      ++n_ok;
    }
  }
  const RunReport r = aggregate_runs(corpus);
  CHECK(*r.ok_offset == doctest::Approx(mean_ok / n_ok).epsilon(1e-12));
}

TEST_CASE("metrics CSV writers emit the table columns") {
  const auto q = [](double t) { return t < 1.0 ? 0.0 : 0.5; };
  const qstl::Trace tr = xq_trace(3.0, q, q);
  std::vector<EpisodeMetrics> eps{episode_metrics(episode_from_xq(tr), kPrm)};
  const RunReport rep = aggregate_runs(eps);

  std::stringstream table;
  write_metrics_csv(table, "pid2", rep);
  const std::string header = [&] {
    std::string line;
    std::getline(table, line);
    return line;
  }();
  CHECK(header ==
        "controller,ok_rising_pct,ok_offset_pct,ok_overshoot_pct,avg_rising_s,avg_offset_pct,"
        "avg_overshoot_pct,max_rising_s,max_offset_pct,max_overshoot_pct,episodes");
  std::string row;
  std::getline(table, row);
  CHECK(row.substr(0, 5) == "pid2,");

  std::stringstream per_ep;
  write_episode_metrics_csv(per_ep, eps);
  std::stringstream detail;
  write_plateau_detail_csv(detail, eps);
  CHECK(per_ep.str().find("episode,plateaus") == 0);
  CHECK(detail.str().find("episode,axis,start") == 0);
}

TEST_CASE("observer parameter validation") {
  ObserverParams bad;
  bad.T1 = 0.6;  // T1 must stay below T
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ObserverParams neg;
  neg.alpha = 0.0;
  CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
}
