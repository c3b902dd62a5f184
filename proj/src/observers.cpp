#include "quadsim/observers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "quadsim/io_util.hpp"
#include "quadsim/stl/eval.hpp"

namespace quadsim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void ObserverParams::validate() const {
  const double vals[] = {alpha, beta, gamma, T, T1, epsilon, band};
  for (double v : vals)
    if (!(v > 0.0)) throw std::invalid_argument("observer parameters must be positive");
  if (!(T1 < T)) throw std::invalid_argument("observer parameters require T1 < T");
}

ObserverSet build_observers(const ObserverParams& prm, double episode_length) {
  prm.validate();
  ObserverSet obs;
  obs.builder = std::make_shared<stl::Builder>();
  stl::Builder& b = *obs.builder;

  const auto x = b.signal("x");
  const auto q = b.signal("q");
  const stl::Interval stability{0.0, prm.T};
  const stl::Interval head{0.0, prm.T1};
  const stl::Interval tail{prm.T1, prm.T};

  obs.stable = b.lt(b.sub(b.window_agg(true, stability, q), b.window_agg(false, stability, q)),
                    b.constant(prm.band));
  obs.becomes_stable =
      b.conjunction(b.lookup(-prm.epsilon, false, b.negation(obs.stable)), obs.stable);
  const auto q_before = b.lookup(-prm.epsilon, 0.0, q);
  obs.up = b.gt(b.sub(q, q_before), b.constant(0.0));
  obs.down = b.negation(obs.up);
  obs.step_size = b.ite(obs.becomes_stable, b.sub(q, q_before), b.constant(0.0));

  // The alpha/beta bounds use |step|: the raw step is negative for downward
  // plateaus and would make the comparisons unsatisfiable.
  const auto step_mag = b.abs(obs.step_size);
  obs.overshoot_up =
      b.implies(b.conjunction(obs.becomes_stable, obs.up),
                b.lt(b.window_agg(true, head, b.sub(x, q)), b.mul(b.constant(prm.alpha), step_mag)));
  obs.overshoot_down =
      b.implies(b.conjunction(obs.becomes_stable, obs.down),
                b.lt(b.window_agg(true, head, b.sub(q, x)), b.mul(b.constant(prm.alpha), step_mag)));
  obs.offset = b.implies(obs.becomes_stable,
                         b.lt(b.window_agg(true, tail, b.abs(b.sub(x, q))),
                              b.mul(b.constant(prm.beta), step_mag)));

  // First instant within [0, T] where |x - q| < gamma * |q|, as an offset
  // from the evaluation time; +inf when the query is never reached.
  const auto reach = b.gt(b.mul(b.constant(prm.gamma), b.abs(q)), b.abs(b.sub(x, q)));
  obs.rising_time = b.ite(obs.becomes_stable,
                          b.sub(b.sample_until(b.time(), stability, kInf, reach), b.time()),
                          b.constant(kInf));

  const stl::Interval episode{0.0, episode_length};
  obs.g_overshoot_up = b.globally(episode, obs.overshoot_up);
  obs.g_overshoot_down = b.globally(episode, obs.overshoot_down);
  obs.g_offset = b.globally(episode, obs.offset);
  return obs;
}

void AxisMetrics::absorb(const AxisMetrics& o) {
  plateaus += o.plateaus;
  overshoot_evaluated += o.overshoot_evaluated;
  overshoot_ok += o.overshoot_ok;
  overshoot_pct_sum += o.overshoot_pct_sum;
  overshoot_pct_max = std::max(overshoot_pct_max, o.overshoot_pct_max);
  offset_evaluated += o.offset_evaluated;
  offset_ok += o.offset_ok;
  offset_pct_sum += o.offset_pct_sum;
  offset_pct_max = std::max(offset_pct_max, o.offset_pct_max);
  rising_reached += o.rising_reached;
  rising_sum += o.rising_sum;
  rising_max = std::max(rising_max, o.rising_max);
}

std::optional<double> AxisMetrics::ok_overshoot_pct() const {
  if (overshoot_evaluated == 0) return std::nullopt;
  return 100.0 * overshoot_ok / overshoot_evaluated;
}
std::optional<double> AxisMetrics::avg_overshoot_pct() const {
  if (overshoot_evaluated == 0) return std::nullopt;
  return overshoot_pct_sum / overshoot_evaluated;
}
std::optional<double> AxisMetrics::max_overshoot_pct() const {
  if (overshoot_evaluated == 0) return std::nullopt;
  return overshoot_pct_max;
}
std::optional<double> AxisMetrics::ok_offset_pct() const {
  if (offset_evaluated == 0) return std::nullopt;
  return 100.0 * offset_ok / offset_evaluated;
}
std::optional<double> AxisMetrics::avg_offset_pct() const {
  if (offset_evaluated == 0) return std::nullopt;
  return offset_pct_sum / offset_evaluated;
}
std::optional<double> AxisMetrics::max_offset_pct() const {
  if (offset_evaluated == 0) return std::nullopt;
  return offset_pct_max;
}
std::optional<double> AxisMetrics::ok_rising_pct() const {
  if (plateaus == 0) return std::nullopt;
  return 100.0 * rising_reached / plateaus;
}
std::optional<double> AxisMetrics::avg_rising() const {
  if (rising_reached == 0) return std::nullopt;
  return rising_sum / rising_reached;
}
std::optional<double> AxisMetrics::max_rising() const {
  if (rising_reached == 0) return std::nullopt;
  return rising_max;
}

namespace {

struct Plateau {
  double start;
  double end;  // next plateau start, or +inf
  double value;
  double step;
};

std::vector<Plateau> detect_plateaus(const stl::Trace& tr, int q_idx, double band) {
  std::vector<Plateau> out;
  const auto times = tr.times();
  double prev_value = tr.default_value(q_idx);
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double v = tr.value_at(q_idx, j);
    if (std::abs(v - prev_value) >= band) {
      if (!out.empty()) out.back().end = times[j];
      out.push_back(Plateau{times[j], kInf, v, v - prev_value});
    }
    prev_value = v;
  }
  return out;
}

}  // namespace

EpisodeMetrics episode_metrics(const stl::Trace& episode, const ObserverParams& prm,
                               const std::vector<AxisSignals>& axes) {
  prm.validate();
  if (axes.size() != 3) throw std::invalid_argument("episode_metrics expects three axes");
  EpisodeMetrics m;

  for (int axis = 0; axis < 3; ++axis) {
    const int xi = episode.signal_index(axes[axis].response);
    const int qi = episode.signal_index(axes[axis].query);
    if (xi < 0 || qi < 0)
      throw stl::TraceError("episode trace is missing signal " + axes[axis].response + " or " +
                            axes[axis].query);
    AxisMetrics& am = m.axis[axis];

    for (const Plateau& pl : detect_plateaus(episode, qi, prm.band)) {
      PlateauRecord rec;
      rec.axis = axis;
      rec.start = pl.start;
      rec.end = pl.end;
      rec.value = pl.value;
      rec.step = pl.step;
      ++am.plateaus;

      // Truncate response windows just before the next plateau start.
      const double cutoff = std::isinf(pl.end) ? kInf : std::nextafter(pl.end, -kInf);
      const double step_mag = std::abs(pl.step);

      if (step_mag > 0.0) {
        const double hi = std::min(pl.start + prm.T1, cutoff);
        double excursion = -kInf;
        episode.for_grid(pl.start, hi, [&](double t) {
          const double diff = pl.step > 0.0 ? episode.value(xi, t) - episode.value(qi, t)
                                            : episode.value(qi, t) - episode.value(xi, t);
          excursion = std::max(excursion, diff);
          return true;
        });
        rec.overshoot_evaluated = true;
        rec.overshoot_ok = excursion < prm.alpha * step_mag;
        rec.overshoot_pct = std::max(0.0, excursion) / step_mag * 100.0;
        ++am.overshoot_evaluated;
        if (rec.overshoot_ok) ++am.overshoot_ok;
        am.overshoot_pct_sum += rec.overshoot_pct;
        am.overshoot_pct_max = std::max(am.overshoot_pct_max, rec.overshoot_pct);

        const double off_lo = pl.start + prm.T1;
        const double off_hi = std::min(pl.start + prm.T, cutoff);
        if (off_lo <= off_hi) {
          double deviation = 0.0;
          episode.for_grid(off_lo, off_hi, [&](double t) {
            deviation = std::max(deviation,
                                 std::abs(episode.value(xi, t) - episode.value(qi, t)));
            return true;
          });
          rec.offset_evaluated = true;
          rec.offset_ok = deviation < prm.beta * step_mag;
          rec.offset_pct = deviation / step_mag * 100.0;
          ++am.offset_evaluated;
          if (rec.offset_ok) ++am.offset_ok;
          am.offset_pct_sum += rec.offset_pct;
          am.offset_pct_max = std::max(am.offset_pct_max, rec.offset_pct);
        }
      }

      episode.for_grid(pl.start, pl.start + prm.T, [&](double t) {
        const double qv = episode.value(qi, t);
        if (std::abs(episode.value(xi, t) - qv) < prm.gamma * std::abs(qv)) {
          rec.rising_reached = true;
          rec.rising_time = t - pl.start;
          return false;
        }
        return true;
      });
      if (rec.rising_reached) {
        ++am.rising_reached;
        am.rising_sum += rec.rising_time;
        am.rising_max = std::max(am.rising_max, rec.rising_time);
      }

      m.detail.push_back(rec);
    }
  }

  for (const auto& am : m.axis) m.pooled.absorb(am);
  return m;
}

namespace {

// mean of the defined per-episode values
struct Averager {
  double sum = 0.0;
  int n = 0;
  void add(const std::optional<double>& v) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  std::optional<double> mean() const {
    if (n == 0) return std::nullopt;
    return sum / n;
  }
};

void append_opt(std::string& out, const std::optional<double>& v) {
  out += ',';
  if (v) append_double(out, *v);
}

}  // namespace

RunReport aggregate_runs(std::span<const EpisodeMetrics> episodes) {
  if (episodes.empty()) throw std::invalid_argument("aggregate_runs: empty episode list");
  RunReport rep;
  rep.episodes = static_cast<int>(episodes.size());
  Averager ok_r, ok_o, ok_s, avg_r, avg_o, avg_s, max_r, max_o, max_s;
  for (const auto& ep : episodes) {
    if (!ep.empty()) ++rep.episodes_with_plateaus;
    const auto& p = ep.pooled;
    ok_r.add(p.ok_rising_pct());
    ok_o.add(p.ok_offset_pct());
    ok_s.add(p.ok_overshoot_pct());
    avg_r.add(p.avg_rising());
    avg_o.add(p.avg_offset_pct());
    avg_s.add(p.avg_overshoot_pct());
    max_r.add(p.max_rising());
    max_o.add(p.max_offset_pct());
    max_s.add(p.max_overshoot_pct());
  }
  rep.ok_rising = ok_r.mean();
  rep.ok_offset = ok_o.mean();
  rep.ok_overshoot = ok_s.mean();
  rep.avg_rising = avg_r.mean();
  rep.avg_offset = avg_o.mean();
  rep.avg_overshoot = avg_s.mean();
  rep.max_rising = max_r.mean();
  rep.max_offset = max_o.mean();
  rep.max_overshoot = max_s.mean();
  return rep;
}

const char* const kMetricsCsvHeader =
    "controller,ok_rising_pct,ok_offset_pct,ok_overshoot_pct,avg_rising_s,avg_offset_pct,"
    "avg_overshoot_pct,max_rising_s,max_offset_pct,max_overshoot_pct,episodes";

void write_metrics_csv(std::ostream& out, const std::string& label, const RunReport& rep) {
  std::string line = std::string(kMetricsCsvHeader) + "\n" + label;
  append_opt(line, rep.ok_rising);
  append_opt(line, rep.ok_offset);
  append_opt(line, rep.ok_overshoot);
  append_opt(line, rep.avg_rising);
  append_opt(line, rep.avg_offset);
  append_opt(line, rep.avg_overshoot);
  append_opt(line, rep.max_rising);
  append_opt(line, rep.max_offset);
  append_opt(line, rep.max_overshoot);
  line += ',' + std::to_string(rep.episodes) + '\n';
  out << line;
}

void write_episode_metrics_csv(std::ostream& out, std::span<const EpisodeMetrics> episodes) {
  out << "episode,plateaus,ok_rising_pct,ok_offset_pct,ok_overshoot_pct,avg_rising_s,"
         "avg_offset_pct,avg_overshoot_pct,max_rising_s,max_offset_pct,max_overshoot_pct\n";
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& p = episodes[i].pooled;
    std::string line = std::to_string(i) + ',' + std::to_string(p.plateaus);
    append_opt(line, p.ok_rising_pct());
    append_opt(line, p.ok_offset_pct());
    append_opt(line, p.ok_overshoot_pct());
    append_opt(line, p.avg_rising());
    append_opt(line, p.avg_offset_pct());
    append_opt(line, p.avg_overshoot_pct());
    append_opt(line, p.max_rising());
    append_opt(line, p.max_offset_pct());
    append_opt(line, p.max_overshoot_pct());
    line += '\n';
    out << line;
  }
}

void write_plateau_detail_csv(std::ostream& out, std::span<const EpisodeMetrics> episodes) {
  out << "episode,axis,start,end,value,step,overshoot_evaluated,overshoot_ok,overshoot_pct,"
         "offset_evaluated,offset_ok,offset_pct,rising_reached,rising_time\n";
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    for (const auto& r : episodes[i].detail) {
      std::string line = std::to_string(i) + ',' + std::to_string(r.axis) + ',';
      append_double(line, r.start);
      line += ',';
      append_double(line, r.end);
      line += ',';
      append_double(line, r.value);
      line += ',';
      append_double(line, r.step);
      line += ',' + std::to_string(r.overshoot_evaluated ? 1 : 0);
      line += ',' + std::to_string(r.overshoot_ok ? 1 : 0);
      line += ',';
      if (r.overshoot_evaluated) append_double(line, r.overshoot_pct);
      line += ',' + std::to_string(r.offset_evaluated ? 1 : 0);
      line += ',' + std::to_string(r.offset_ok ? 1 : 0);
      line += ',';
      if (r.offset_evaluated) append_double(line, r.offset_pct);
      line += ',' + std::to_string(r.rising_reached ? 1 : 0);
      line += ',';
      if (r.rising_reached) append_double(line, r.rising_time);
      line += '\n';
      out << line;
    }
  }
}

}  // namespace quadsim
