#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "quadsim/harness.hpp"
#include "quadsim/io_util.hpp"
#include "quadsim/stl/eval.hpp"
#include "quadsim/stl/parser.hpp"

namespace {

using namespace quadsim;

struct ConfigCli {
  std::string config_file;
  std::string controller;
  std::string query_class;
  std::optional<double> horizon;
  std::optional<std::uint64_t> seed;
  std::string scenario;
  std::optional<double> factor_min, factor_max, wind_cap;
  std::string observation;
  std::string params_file;
};

void add_config_options(CLI::App* app, ConfigCli& c) {
  app->add_option("--config", c.config_file, "episode config JSON file");
  app->add_option("--controller", c.controller, "pid1 | pid2 | mlp:<weights.json>");
  app->add_option("--query-class", c.query_class, "easy | medium | hard");
  app->add_option("--horizon", c.horizon, "episode length in seconds");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--scenario", c.scenario, "nominal | saturation | wind");
  app->add_option("--factor-min", c.factor_min, "saturation factor lower bound");
  app->add_option("--factor-max", c.factor_max, "saturation factor upper bound");
  app->add_option("--wind-cap", c.wind_cap, "gust magnitude cap (m/s)");
  app->add_option("--observation", c.observation, "dim3 | dim7 | dim3_failure | dim3_wind");
  app->add_option("--params", c.params_file, "model parameter override JSON file");
}

EpisodeConfig resolve_config(const ConfigCli& c) {
  EpisodeConfig cfg;
  if (!c.config_file.empty()) cfg = EpisodeConfig::load(c.config_file);
  if (!c.controller.empty()) cfg.controller = ControllerSpec::parse(c.controller);
  if (!c.query_class.empty()) {
    cfg.query_class_name = c.query_class;
    cfg.query_class = QueryClass::from_name(c.query_class);
  }
  if (c.horizon) cfg.horizon = *c.horizon;
  if (c.seed) cfg.seed = *c.seed;
  if (!c.scenario.empty()) {
    if (c.scenario == "nominal") cfg.scenario.mode = ScenarioMode::Nominal;
    else if (c.scenario == "saturation") cfg.scenario.mode = ScenarioMode::Saturation;
    else if (c.scenario == "wind") cfg.scenario.mode = ScenarioMode::Wind;
    else throw ConfigError("unknown scenario: " + c.scenario);
  }
  if (c.factor_min) cfg.scenario.factor_min = *c.factor_min;
  if (c.factor_max) cfg.scenario.factor_max = *c.factor_max;
  if (c.wind_cap) cfg.scenario.magnitude_cap = *c.wind_cap;
  if (!c.observation.empty()) cfg.observation = ObservationSpec::from_name(c.observation);
  if (!c.params_file.empty()) {
    std::ifstream in(c.params_file);
    if (!in) throw ConfigError("cannot open params file: " + c.params_file);
    nlohmann::json j;
    in >> j;
    apply_param_overrides(cfg.params, cfg.aero, j);
  }
  cfg.validate();
  return cfg;
}

int cmd_simulate(const ConfigCli& c, const std::string& out_file) {
  const EpisodeConfig cfg = resolve_config(c);
  const EpisodeResult res = run_episode(cfg);
  if (out_file.empty() || out_file == "-") {
    res.trace.write_csv(std::cout);
  } else {
    res.trace.write_csv_file(out_file);
  }
  if (res.fault) {
    std::cerr << "simulation fault at t=" << res.fault_time << ": " << res.fault_message << "\n";
    return 2;
  }
  return 0;
}

int cmd_evaluate(const ConfigCli& c, int episodes, int parallelism, const std::string& out_dir,
                 bool no_traces) {
  const EpisodeConfig cfg = resolve_config(c);
  CampaignOptions opt;
  opt.episodes = episodes;
  opt.parallelism = parallelism;
  opt.out_dir = out_dir;
  opt.write_traces = !no_traces;
  const CampaignResult result = run_campaign(cfg, opt);
  write_metrics_csv(std::cout, result.label, result.report);
  if (!result.failed.empty()) {
    std::cerr << result.failed.size() << " episode(s) failed:";
    for (int i : result.failed) std::cerr << ' ' << i;
    std::cerr << "\n";
  }
  return 0;
}

int cmd_monitor(const std::string& spec_file, const std::string& trace_file,
                const std::string& at, bool grid, const std::string& out_file) {
  std::ifstream spec_in(spec_file);
  if (!spec_in) throw ConfigError("cannot open spec file: " + spec_file);
  std::stringstream buf;
  buf << spec_in.rdbuf();
  const stl::Specification spec = stl::parse_spec(buf.str());
  const stl::Trace trace = stl::Trace::read_csv_file(trace_file);

  std::vector<double> times;
  if (grid) {
    times.assign(trace.times().begin(), trace.times().end());
  } else {
    std::stringstream ss(at);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) times.push_back(std::stod(tok));
    }
    if (times.empty()) throw ConfigError("monitor needs --at times or --grid");
  }

  std::ofstream file_out;
  std::ostream* out = &std::cout;
  if (!out_file.empty() && out_file != "-") {
    file_out.open(out_file);
    if (!file_out) throw ConfigError("cannot open output file: " + out_file);
    out = &file_out;
  }

  stl::Evaluator ev(trace);
  *out << "time,name,value,satisfied,robustness\n";
  for (double t : times) {
    for (const auto& [name, def] : spec.definitions) {
      std::string line;
      append_double(line, t);
      line += ',' + name + ',';
      if (const auto* term = std::get_if<stl::TermPtr>(&def)) {
        append_double(line, ev.term(*term, t));
        line += ",,";
      } else {
        const auto& f = std::get<stl::FormulaPtr>(def);
        line += ',';
        line += ev.sat(f, t) ? '1' : '0';
        line += ',';
        append_double(line, ev.rho(f, t));
      }
      line += '\n';
      *out << line;
    }
  }
  return 0;
}

int cmd_gen_queries(const std::string& cls, double horizon, std::uint64_t seed,
                    const std::string& out_file) {
  Rng rng(derive_seed(seed, 0, 2));
  const QuerySignal q = sample_query(QueryClass::from_name(cls), horizon, rng);
  const stl::Trace tr = q.to_trace();
  if (out_file.empty() || out_file == "-") {
    tr.write_csv(std::cout);
  } else {
    tr.write_csv_file(out_file);
  }
  return 0;
}

int cmd_report(const std::string& run_dir, const std::string& out_file) {
  std::ofstream file_out;
  std::ostream* out = &std::cout;
  if (!out_file.empty() && out_file != "-") {
    file_out.open(out_file);
    if (!file_out) throw ConfigError("cannot open output file: " + out_file);
    out = &file_out;
  }
  const ReportResult res = report_run(run_dir, *out);
  for (const auto& s : res.skipped) std::cerr << "skipped " << s << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crazyflie 2.0 attitude-control simulation and STL evaluation toolkit"};
  app.require_subcommand(1);

  ConfigCli sim_cfg;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "run one closed-loop episode, emit the trace CSV");
  add_config_options(simulate, sim_cfg);
  simulate->add_option("--out", sim_out, "trace output file ('-' for stdout)");

  ConfigCli eval_cfg;
  int episodes = 100, parallelism = 1;
  std::string eval_out_dir;
  bool no_traces = false;
  auto* evaluate = app.add_subcommand("evaluate", "run an evaluation campaign");
  add_config_options(evaluate, eval_cfg);
  evaluate->add_option("--episodes", episodes, "number of episodes");
  evaluate->add_option("--parallelism", parallelism, "worker threads");
  evaluate->add_option("--out-dir", eval_out_dir, "run output directory");
  evaluate->add_flag("--no-traces", no_traces, "skip per-episode trace files");

  std::string mon_spec, mon_trace, mon_at, mon_out;
  bool mon_grid = false;
  auto* monitor = app.add_subcommand("monitor", "evaluate an STL specification over a trace");
  monitor->add_option("--spec", mon_spec, "specification file")->required();
  monitor->add_option("--trace", mon_trace, "trace CSV file")->required();
  monitor->add_option("--at", mon_at, "comma-separated evaluation times");
  monitor->add_flag("--grid", mon_grid, "evaluate at every trace breakpoint");
  monitor->add_option("--out", mon_out, "output CSV ('-' for stdout)");

  std::string gq_class = "medium", gq_out;
  double gq_horizon = 20.0;
  std::uint64_t gq_seed = 0;
  auto* gen = app.add_subcommand("gen-queries", "sample a query signal, emit it as CSV");
  gen->add_option("--query-class", gq_class, "easy | medium | hard");
  gen->add_option("--horizon", gq_horizon, "signal length in seconds");
  gen->add_option("--seed", gq_seed, "seed");
  gen->add_option("--out", gq_out, "output CSV ('-' for stdout)");

  std::string rep_dir, rep_out;
  auto* report = app.add_subcommand("report", "rebuild the metrics table from a run directory");
  report->add_option("--run-dir", rep_dir, "campaign output directory")->required();
  report->add_option("--out", rep_out, "table output file ('-' for stdout)");

  ConfigCli env_cfg;
  auto* env = app.add_subcommand("env", "environment stepping over NDJSON stdin/stdout");
  add_config_options(env, env_cfg);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(sim_cfg, sim_out);
    if (evaluate->parsed())
      return cmd_evaluate(eval_cfg, episodes, parallelism, eval_out_dir, no_traces);
    if (monitor->parsed()) return cmd_monitor(mon_spec, mon_trace, mon_at, mon_grid, mon_out);
    if (gen->parsed()) return cmd_gen_queries(gq_class, gq_horizon, gq_seed, gq_out);
    if (report->parsed()) return cmd_report(rep_dir, rep_out);
    if (env->parsed()) {
      EpisodeConfig cfg = resolve_config(env_cfg);
      if (env_cfg.config_file.empty() && !env_cfg.horizon) cfg.horizon = 1.0;
      run_env_protocol(std::cin, std::cout, cfg);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
