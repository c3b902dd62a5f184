#include "quadsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "quadsim/io_util.hpp"

namespace quadsim {

namespace {

// Per-tick inputs a controller may consult besides the physical state.
struct ControlContext {
  double last_thrust = 0.0;
  const std::optional<MotorFailure>* failure = nullptr;
  const std::optional<GustSpec>* gust = nullptr;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual Command step(const QuadState& state, const Setpoints& sp, const ControlContext& ctx,
                       double dt) = 0;
};

class Pid1Controller final : public Controller {
 public:
  Command step(const QuadState& s, const Setpoints& sp, const ControlContext&, double dt) override {
    return pid1_step(s, sp, pid_, dt);
  }

 private:
  PidState pid_;
};

class Pid2Controller final : public Controller {
 public:
  Command step(const QuadState& s, const Setpoints& sp, const ControlContext&, double dt) override {
    return pid2_step(s, sp, pid_, dt);
  }

 private:
  PidState pid_;
};

class MlpController final : public Controller {
 public:
  explicit MlpController(MlpPolicy policy) : policy_(std::move(policy)) {}

  Command step(const QuadState& s, const Setpoints& sp, const ControlContext& ctx,
               double dt) override {
    const Eigen::VectorXd obs = build_observation(policy_.observation, s, sp, ctx.last_thrust,
                                                  *ctx.failure, *ctx.gust);
    const Vec3 att = policy_step(policy_, obs);
    // Altitude stays PID-regulated; attitude channels of this step are unused.
    Command c = pid2_step(s, Setpoints{sp.z_sp, 0.0, 0.0, 0.0}, zpid_, dt);
    c.cmd_phi = att[0];
    c.cmd_theta = att[1];
    c.cmd_psi = att[2];
    return c;
  }

  const ObservationSpec& observation() const { return policy_.observation; }

 private:
  MlpPolicy policy_;
  PidState zpid_;
};

struct ControllerInstance {
  std::unique_ptr<Controller> controller;
  ObservationSpec observation;
};

ControllerInstance make_controller(const EpisodeConfig& cfg) {
  switch (cfg.controller.kind) {
    case ControllerSpec::Kind::Pid1:
      return {std::make_unique<Pid1Controller>(), cfg.observation};
    case ControllerSpec::Kind::Pid2:
      return {std::make_unique<Pid2Controller>(), cfg.observation};
    case ControllerSpec::Kind::Mlp: {
      auto mlp = std::make_unique<MlpController>(load_policy(cfg.controller.mlp_path));
      const ObservationSpec spec = mlp->observation();
      return {std::move(mlp), spec};
    }
  }
  throw ConfigError("unknown controller kind");
}

QuadState sample_initial_state(Rng& rng, const InitialStateRanges& ranges) {
  QuadState s;
  s.phi = rng.uniform(-ranges.angle_range, ranges.angle_range);
  s.theta = rng.uniform(-ranges.angle_range, ranges.angle_range);
  s.psi = rng.uniform(-ranges.angle_range, ranges.angle_range);
  s.p = rng.uniform(-ranges.rate_range, ranges.rate_range);
  s.q = rng.uniform(-ranges.rate_range, ranges.rate_range);
  s.r = rng.uniform(-ranges.rate_range, ranges.rate_range);
  return s;
}

struct ScenarioDraw {
  std::optional<MotorFailure> failure;
  std::optional<GustSpec> gust;
};

ScenarioDraw draw_scenario(const EpisodeConfig& cfg, Rng& rng, const QuerySignal& query) {
  ScenarioDraw draw;
  switch (cfg.scenario.mode) {
    case ScenarioMode::Nominal:
      break;
    case ScenarioMode::Saturation:
      draw.failure =
          MotorFailure{rng.uniform(cfg.scenario.factor_min, cfg.scenario.factor_max), 1};
      break;
    case ScenarioMode::Wind: {
      const auto starts = query.plateau_starts();
      draw.gust = sample_gust(rng,
                              GustSampling{cfg.scenario.magnitude_cap,
                                           cfg.scenario.gust_half_life_min,
                                           cfg.scenario.gust_half_life_max},
                              starts);
      break;
    }
  }
  return draw;
}

std::vector<std::string> trace_signal_names(int obs_dim) {
  std::vector<std::string> names = {"z",    "u",     "v",       "w",         "phi",
                                    "theta", "psi",  "p",       "q",         "r",
                                    "p_sp",  "q_sp", "r_sp",    "thrust",    "cmd_phi",
                                    "cmd_theta", "cmd_psi", "reward"};
  for (int i = 0; i < obs_dim; ++i) names.push_back("obs_" + std::to_string(i));
  return names;
}

}  // namespace

std::string ControllerSpec::label() const {
  switch (kind) {
    case Kind::Pid1: return "pid1";
    case Kind::Pid2: return "pid2";
    case Kind::Mlp: return "mlp:" + mlp_path;
  }
  return "?";
}

ControllerSpec ControllerSpec::parse(const std::string& text) {
  if (text == "pid1") return {Kind::Pid1, {}};
  if (text == "pid2") return {Kind::Pid2, {}};
  if (text.rfind("mlp:", 0) == 0) {
    ControllerSpec spec{Kind::Mlp, text.substr(4)};
    if (spec.mlp_path.empty()) throw ConfigError("mlp controller needs a weights file path");
    return spec;
  }
  throw ConfigError("unknown controller: " + text + " (expected pid1, pid2 or mlp:<path>)");
}

void EpisodeConfig::validate() const {
  params.validate();
  if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
  if (!(sim_step > 0.0)) throw ConfigError("sim_step must be positive");
  const double ratio = control_period / sim_step;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0)
    throw ConfigError("control_period must be a positive integer multiple of sim_step");
  if (!(initial.angle_range >= 0.0 && initial.angle_range <= M_PI))
    throw ConfigError("initial angle range out of bounds");
  if (!(initial.rate_range >= 0.0 && initial.rate_range <= 5.0 * M_PI))
    throw ConfigError("initial rate range out of bounds");
  observer_params.validate();
}

nlohmann::json EpisodeConfig::to_json() const {
  nlohmann::json j;
  j["controller"] = controller.label();
  j["query_class"] = query_class_name == "custom"
                         ? nlohmann::json{{"amplitude", {query_class.amplitude.lo, query_class.amplitude.hi}},
                                          {"duration", {query_class.duration.lo, query_class.duration.hi}},
                                          {"step", {query_class.step.lo, query_class.step.hi}}}
                         : nlohmann::json(query_class_name);
  j["horizon"] = horizon;
  j["seed"] = seed;
  j["control_period"] = control_period;
  j["sim_step"] = sim_step;
  j["z_setpoint"] = z_setpoint;
  j["omega_max"] = reward_params.omega_max;
  j["observation"] = observation.name();
  j["initial"] = {{"angle_range", initial.angle_range}, {"rate_range", initial.rate_range}};
  switch (scenario.mode) {
    case ScenarioMode::Nominal:
      j["scenario"] = {{"mode", "nominal"}};
      break;
    case ScenarioMode::Saturation:
      j["scenario"] = {{"mode", "saturation"},
                       {"factor_min", scenario.factor_min},
                       {"factor_max", scenario.factor_max}};
      break;
    case ScenarioMode::Wind:
      j["scenario"] = {{"mode", "wind"},
                       {"magnitude_cap", scenario.magnitude_cap},
                       {"gust_half_life_min", scenario.gust_half_life_min},
                       {"gust_half_life_max", scenario.gust_half_life_max}};
      break;
  }
  j["observer"] = {{"alpha", observer_params.alpha}, {"beta", observer_params.beta},
                   {"gamma", observer_params.gamma}, {"T", observer_params.T},
                   {"T1", observer_params.T1},       {"epsilon", observer_params.epsilon},
                   {"d", observer_params.band}};
  j["params"] = {{"Ix", params.Ix}, {"Iy", params.Iy}, {"Iz", params.Iz}, {"m", params.m},
                 {"g", params.g},   {"CT", params.CT}, {"CD", params.CD}, {"C1", params.C1},
                 {"C2", params.C2}, {"h", params.h},   {"d", params.d},   {"p_max", params.p_max}};
  j["K"] = {aero.drag_diag[0], aero.drag_diag[1], aero.drag_diag[2]};
  return j;
}

void apply_param_overrides(QuadParams& params, AeroParams& aero, const nlohmann::json& j) {
  const auto set = [&](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  set("Ix", params.Ix);
  set("Iy", params.Iy);
  set("Iz", params.Iz);
  set("m", params.m);
  set("g", params.g);
  set("CT", params.CT);
  set("CD", params.CD);
  set("C1", params.C1);
  set("C2", params.C2);
  set("h", params.h);
  set("d", params.d);
  set("p_max", params.p_max);
  if (j.contains("K")) {
    const auto& k = j.at("K");
    if (!k.is_array() || k.size() != 3)
      throw ConfigError("K override must be a 3-element array (diagonal)");
    aero.drag_diag = Vec3(k[0].get<double>(), k[1].get<double>(), k[2].get<double>());
  }
  params.validate();
}

EpisodeConfig EpisodeConfig::from_json(const nlohmann::json& j) {
  EpisodeConfig cfg;
  if (j.contains("controller"))
    cfg.controller = ControllerSpec::parse(j.at("controller").get<std::string>());
  if (j.contains("query_class")) {
    const auto& qc = j.at("query_class");
    if (qc.is_string()) {
      cfg.query_class_name = qc.get<std::string>();
      cfg.query_class = QueryClass::from_name(cfg.query_class_name);
    } else {
      cfg.query_class_name = "custom";
      const auto rng2 = [&](const char* key) {
        const auto& a = qc.at(key);
        return UniformSupport{a.at(0).get<double>(), a.at(1).get<double>()};
      };
      cfg.query_class = QueryClass{rng2("amplitude"), rng2("duration"), rng2("step")};
    }
  }
  if (j.contains("horizon")) cfg.horizon = j.at("horizon").get<double>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("control_period")) cfg.control_period = j.at("control_period").get<double>();
  if (j.contains("sim_step")) cfg.sim_step = j.at("sim_step").get<double>();
  if (j.contains("z_setpoint")) cfg.z_setpoint = j.at("z_setpoint").get<double>();
  if (j.contains("omega_max")) cfg.reward_params.omega_max = j.at("omega_max").get<double>();
  if (j.contains("observation"))
    cfg.observation = ObservationSpec::from_name(j.at("observation").get<std::string>());
  if (j.contains("initial")) {
    const auto& init = j.at("initial");
    if (init.contains("angle_range")) cfg.initial.angle_range = init.at("angle_range").get<double>();
    if (init.contains("rate_range")) cfg.initial.rate_range = init.at("rate_range").get<double>();
  }
  if (j.contains("scenario")) {
    const auto& sc = j.at("scenario");
    const std::string mode = sc.value("mode", "nominal");
    if (mode == "nominal") {
      cfg.scenario.mode = ScenarioMode::Nominal;
    } else if (mode == "saturation") {
      cfg.scenario.mode = ScenarioMode::Saturation;
      cfg.scenario.factor_min = sc.value("factor_min", 0.8);
      cfg.scenario.factor_max = sc.value("factor_max", 1.0);
    } else if (mode == "wind") {
      cfg.scenario.mode = ScenarioMode::Wind;
      cfg.scenario.magnitude_cap = sc.value("magnitude_cap", 10.0);
      cfg.scenario.gust_half_life_min = sc.value("gust_half_life_min", 0.5);
      cfg.scenario.gust_half_life_max = sc.value("gust_half_life_max", 2.0);
    } else {
      throw ConfigError("unknown scenario mode: " + mode);
    }
  }
  if (j.contains("observer")) {
    const auto& o = j.at("observer");
    auto& prm = cfg.observer_params;
    if (o.contains("alpha")) prm.alpha = o.at("alpha").get<double>();
    if (o.contains("beta")) prm.beta = o.at("beta").get<double>();
    if (o.contains("gamma")) prm.gamma = o.at("gamma").get<double>();
    if (o.contains("T")) prm.T = o.at("T").get<double>();
    if (o.contains("T1")) prm.T1 = o.at("T1").get<double>();
    if (o.contains("epsilon")) prm.epsilon = o.at("epsilon").get<double>();
    if (o.contains("d")) prm.band = o.at("d").get<double>();
  }
  if (j.contains("params")) apply_param_overrides(cfg.params, cfg.aero, j.at("params"));
  if (j.contains("K")) apply_param_overrides(cfg.params, cfg.aero, nlohmann::json{{"K", j.at("K")}});
  cfg.validate();
  return cfg;
}

EpisodeConfig EpisodeConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file: " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return from_json(j);
}

EpisodeResult run_episode(const EpisodeConfig& cfg) {
  cfg.validate();
  Rng rng_init(derive_seed(cfg.seed, 0, 1));
  Rng rng_query(derive_seed(cfg.seed, 0, 2));
  Rng rng_scen(derive_seed(cfg.seed, 0, 3));

  QuerySignal query = sample_query(cfg.query_class, cfg.horizon, rng_query, cfg.query_limits);
  const ScenarioDraw scen = draw_scenario(cfg, rng_scen, query);
  QuadState state = sample_initial_state(rng_init, cfg.initial);

  ControllerInstance ctrl = make_controller(cfg);
  const ObservationSpec obs_spec = ctrl.observation;
  if (obs_spec.kind == ObservationKind::Dim3Failure && !scen.failure)
    throw ConfigError("observation dim3_failure requires the saturation scenario");
  if (obs_spec.kind == ObservationKind::Dim3Wind && !scen.gust)
    throw ConfigError("observation dim3_wind requires the wind scenario");

  const int obs_dim = obs_spec.dimension();
  stl::Trace trace(trace_signal_names(obs_dim),
                   std::vector<double>(18 + obs_dim, 0.0));

  EpisodeResult res{std::move(trace), std::move(query), scen.failure, scen.gust};

  const long substeps = std::lround(cfg.control_period / cfg.sim_step);
  const long n_steps = std::lround(cfg.horizon / cfg.sim_step);
  Command cmd{};
  Omega4 omegas = Omega4::Zero();
  WrenchInput base{};
  double last_thrust = 0.0;
  std::vector<double> row(18 + obs_dim);

  for (long s = 0; s <= n_steps; ++s) {
    const double t = static_cast<double>(s) * cfg.sim_step;
    const Vec3 qv = res.query.value(t);
    const Setpoints sp{cfg.z_setpoint, qv[0], qv[1], qv[2]};

    const Eigen::VectorXd obs =
        build_observation(obs_spec, state, sp, last_thrust, res.failure, res.gust);

    if (s < n_steps && s % substeps == 0) {
      ControlContext ctx{last_thrust, &res.failure, &res.gust};
      cmd = clamp_command(ctrl.controller->step(state, sp, ctx, cfg.control_period));
      const Pwm4 pwm = apply_saturation(mix_pwm(cmd), res.failure, cfg.params);
      omegas = pwm_to_omega(pwm, cfg.params);
      base = force_moments_pwm(pwm, cfg.params);
      last_thrust = cmd.thrust;
    }

    row[0] = state.z;   row[1] = state.u;     row[2] = state.v;    row[3] = state.w;
    row[4] = state.phi; row[5] = state.theta; row[6] = state.psi;
    row[7] = state.p;   row[8] = state.q;     row[9] = state.r;
    row[10] = qv[0];    row[11] = qv[1];      row[12] = qv[2];
    row[13] = cmd.thrust; row[14] = cmd.cmd_phi; row[15] = cmd.cmd_theta; row[16] = cmd.cmd_psi;
    row[17] = reward(state, qv, cfg.reward_params);
    for (int i = 0; i < obs_dim; ++i) row[18 + i] = obs[i];
    res.trace.add_breakpoint(t, row);

    if (s == n_steps) break;
    try {
      const auto wrench = [&](const QuadState& x, double tau) {
        WrenchInput w = base;
        if (res.gust && res.gust->active(tau)) {
          const auto [fa, ma] =
              aero_wrench(x, omegas, gust_velocity(tau, *res.gust), cfg.aero, cfg.params);
          w.Fa = fa;
          w.Ma = ma;
        }
        return w;
      };
      state = rk4_step(state, t, cfg.sim_step, cfg.params, wrench);
    } catch (const SimulationFault& e) {
      res.fault = true;
      res.fault_time = t;
      res.fault_message = e.what();
      break;
    }
  }
  return res;
}

namespace {

std::string episode_file_name(int index) {
  std::string n = std::to_string(index);
  while (n.size() < 3) n.insert(n.begin(), '0');
  return "episode_" + n + ".csv";
}

}  // namespace

CampaignResult run_campaign(const EpisodeConfig& base, const CampaignOptions& opt) {
  if (opt.episodes < 1) throw ConfigError("a campaign needs at least one episode");
  base.validate();
  if (!opt.out_dir.empty()) std::filesystem::create_directories(opt.out_dir);

  std::vector<std::optional<EpisodeMetrics>> metrics(opt.episodes);
  std::vector<char> failed(opt.episodes, 0);
  std::vector<std::string> failure_detail(opt.episodes);

  std::atomic<int> next{0};
  const auto work = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= opt.episodes) return;
      EpisodeConfig cfg = base;
      cfg.seed = derive_seed(base.seed, static_cast<std::uint64_t>(i));
      try {
        const EpisodeResult er = run_episode(cfg);
        if (!opt.out_dir.empty() && opt.write_traces)
          er.trace.write_csv_file(opt.out_dir / episode_file_name(i));
        if (er.fault) {
          failed[i] = 1;
          failure_detail[i] = er.fault_message;
        } else {
          metrics[i] = episode_metrics(er.trace, base.observer_params);
        }
      } catch (const std::exception& e) {
        failed[i] = 1;
        failure_detail[i] = e.what();
      }
    }
  };

  const int workers = std::max(1, opt.parallelism);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  CampaignResult result;
  result.label = base.controller.label();
  for (int i = 0; i < opt.episodes; ++i) {
    if (failed[i]) {
      result.failed.push_back(i);
    } else if (metrics[i]) {
      result.per_episode.push_back(std::move(*metrics[i]));
    }
  }
  if (result.per_episode.empty()) {
    result.report = RunReport{};
    result.report.episodes = 0;
  } else {
    result.report = aggregate_runs(result.per_episode);
  }

  if (!opt.out_dir.empty()) {
    {
      nlohmann::json cj = base.to_json();
      cj["episodes"] = opt.episodes;
      std::ofstream out(opt.out_dir / "config.json");
      out << cj.dump(2) << '\n';
    }
    {
      std::ofstream out(opt.out_dir / "metrics.csv");
      write_metrics_csv(out, result.label, result.report);
    }
    {
      std::ofstream out(opt.out_dir / "metrics_episodes.csv");
      write_episode_metrics_csv(out, result.per_episode);
    }
    {
      std::ofstream out(opt.out_dir / "metrics_detail.csv");
      write_plateau_detail_csv(out, result.per_episode);
    }
    {
      nlohmann::json sj;
      sj["label"] = result.label;
      sj["episodes"] = opt.episodes;
      sj["failed"] = result.failed;
      nlohmann::json fj = nlohmann::json::object();
      for (int i : result.failed) fj[std::to_string(i)] = failure_detail[i];
      sj["failures"] = fj;
      const auto put = [&](const char* key, const std::optional<double>& v) {
        sj["report"][key] = v ? nlohmann::json(*v) : nlohmann::json();
      };
      put("ok_rising_pct", result.report.ok_rising);
      put("ok_offset_pct", result.report.ok_offset);
      put("ok_overshoot_pct", result.report.ok_overshoot);
      put("avg_rising_s", result.report.avg_rising);
      put("avg_offset_pct", result.report.avg_offset);
      put("avg_overshoot_pct", result.report.avg_overshoot);
      put("max_rising_s", result.report.max_rising);
      put("max_offset_pct", result.report.max_offset);
      put("max_overshoot_pct", result.report.max_overshoot);
      std::ofstream out(opt.out_dir / "summary.json");
      out << sj.dump(2) << '\n';
    }
  }
  return result;
}

struct EnvSession::Impl {
  EpisodeConfig cfg;
  QuadState state;
  QuerySignal query;
  std::optional<MotorFailure> failure;
  std::optional<GustSpec> gust;
  PidState zpid;
  long tick = 0;
  long total_ticks = 0;
  double last_thrust = 0.0;
  bool done = true;
  std::uint64_t resets = 0;

  explicit Impl(EpisodeConfig c) : cfg(std::move(c)) {
    cfg.validate();
    if (cfg.controller.kind == ControllerSpec::Kind::Mlp)
      throw ConfigError("env sessions take external actions; use pid1/pid2 configs");
  }

  Eigen::VectorXd observe(double t) const {
    const Vec3 qv = query.value(t);
    const Setpoints sp{cfg.z_setpoint, qv[0], qv[1], qv[2]};
    return build_observation(cfg.observation, state, sp, last_thrust, failure, gust);
  }

  Eigen::VectorXd reset() {
    const std::uint64_t episode_seed = derive_seed(cfg.seed, resets++, 7);
    Rng rng_init(derive_seed(episode_seed, 0, 1));
    Rng rng_query(derive_seed(episode_seed, 0, 2));
    Rng rng_scen(derive_seed(episode_seed, 0, 3));
    query = sample_training_query(cfg.horizon, rng_query);
    const ScenarioDraw scen = draw_scenario(cfg, rng_scen, query);
    failure = scen.failure;
    gust = scen.gust;
    if (cfg.observation.kind == ObservationKind::Dim3Failure && !failure)
      throw ConfigError("observation dim3_failure requires the saturation scenario");
    if (cfg.observation.kind == ObservationKind::Dim3Wind && !gust)
      throw ConfigError("observation dim3_wind requires the wind scenario");
    state = sample_initial_state(rng_init, cfg.initial);
    zpid.reset();
    tick = 0;
    total_ticks = static_cast<long>(std::floor(cfg.horizon / cfg.control_period + 1e-9));
    last_thrust = 0.0;
    done = false;
    return observe(0.0);
  }

  StepResult step(const Vec3& action) {
    if (done) throw std::logic_error("EnvSession::step called after the episode ended");
    const double t = static_cast<double>(tick) * cfg.control_period;

    Command cmd = pid2_step(state, Setpoints{cfg.z_setpoint, 0.0, 0.0, 0.0}, zpid,
                            cfg.control_period);
    cmd.cmd_phi = action[0];
    cmd.cmd_theta = action[1];
    cmd.cmd_psi = action[2];
    cmd = clamp_command(cmd);

    const Pwm4 pwm = apply_saturation(mix_pwm(cmd), failure, cfg.params);
    const Omega4 omegas = pwm_to_omega(pwm, cfg.params);
    const WrenchInput basew = force_moments_pwm(pwm, cfg.params);
    last_thrust = cmd.thrust;

    const long substeps = std::lround(cfg.control_period / cfg.sim_step);
    StepResult out;
    try {
      for (long i = 0; i < substeps; ++i) {
        const double tau = t + static_cast<double>(i) * cfg.sim_step;
        const auto wrench = [&](const QuadState& x, double stage_t) {
          WrenchInput w = basew;
          if (gust && gust->active(stage_t)) {
            const auto [fa, ma] =
                aero_wrench(x, omegas, gust_velocity(stage_t, *gust), cfg.aero, cfg.params);
            w.Fa = fa;
            w.Ma = ma;
          }
          return w;
        };
        state = rk4_step(state, tau, cfg.sim_step, cfg.params, wrench);
      }
    } catch (const SimulationFault&) {
      done = true;
      out.done = true;
      out.reward = -1.0;
      out.observation = Eigen::VectorXd::Zero(cfg.observation.dimension());
      return out;
    }

    ++tick;
    const double t_next = static_cast<double>(tick) * cfg.control_period;
    done = tick >= total_ticks;
    out.done = done;
    out.reward = reward(state, query.value(t_next), cfg.reward_params);
    out.observation = observe(t_next);
    return out;
  }
};

EnvSession::EnvSession(EpisodeConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
EnvSession::~EnvSession() = default;

Eigen::VectorXd EnvSession::reset() { return impl_->reset(); }
EnvSession::StepResult EnvSession::step(const Vec3& action) { return impl_->step(action); }
int EnvSession::observation_dimension() const { return impl_->cfg.observation.dimension(); }

void run_env_protocol(std::istream& in, std::ostream& out, const EpisodeConfig& config) {
  EnvSession session(config);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json reply;
    try {
      const nlohmann::json req = nlohmann::json::parse(line);
      const std::string cmd = req.at("cmd").get<std::string>();
      if (cmd == "reset") {
        const Eigen::VectorXd obs = session.reset();
        reply["observation"] = std::vector<double>(obs.data(), obs.data() + obs.size());
      } else if (cmd == "step") {
        const auto& a = req.at("action");
        if (!a.is_array() || a.size() != 3)
          throw ConfigError("action must be a 3-element array");
        const auto res = session.step(
            Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>()));
        reply["observation"] =
            std::vector<double>(res.observation.data(), res.observation.data() + res.observation.size());
        reply["reward"] = res.reward;
        reply["done"] = res.done;
      } else if (cmd == "close") {
        out << nlohmann::json{{"ok", true}}.dump() << '\n' << std::flush;
        return;
      } else {
        throw ConfigError("unknown command: " + cmd);
      }
    } catch (const std::exception& e) {
      reply = nlohmann::json{{"error", e.what()}};
    }
    out << reply.dump() << '\n' << std::flush;
  }
}

ReportResult report_run(const std::filesystem::path& run_dir, std::ostream& table_out,
                        const ObserverParams& params) {
  if (!std::filesystem::is_directory(run_dir))
    throw ConfigError("not a run directory: " + run_dir.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("episode_", 0) == 0 &&
        entry.path().extension() == ".csv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw ConfigError("no episode traces found in " + run_dir.string());

  std::filesystem::create_directories(run_dir / "plots");
  ReportResult result;
  std::vector<EpisodeMetrics> metrics;
  for (const auto& file : files) {
    try {
      const stl::Trace tr = stl::Trace::read_csv_file(file);
      metrics.push_back(episode_metrics(tr, params));
      ++result.episodes_processed;
      const stl::Trace plot = tr.select({"p", "p_sp", "q", "q_sp", "r", "r_sp"});
      plot.write_csv_file(run_dir / "plots" / (file.stem().string() + "_track.csv"));
    } catch (const std::exception& e) {
      result.skipped.push_back(file.filename().string() + ": " + e.what());
    }
  }
  if (metrics.empty()) throw ConfigError("no readable episode traces in " + run_dir.string());

  std::string label = "run";
  const auto summary = run_dir / "summary.json";
  if (std::filesystem::exists(summary)) {
    try {
      std::ifstream in(summary);
      nlohmann::json sj;
      in >> sj;
      label = sj.value("label", label);
    } catch (...) {
      // keep the fallback label
    }
  }

  result.report = aggregate_runs(metrics);
  write_metrics_csv(table_out, label, result.report);
  return result;
}

}  // namespace quadsim
