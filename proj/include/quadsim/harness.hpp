#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "quadsim/controllers.hpp"
#include "quadsim/dynamics.hpp"
#include "quadsim/faults.hpp"
#include "quadsim/observers.hpp"
#include "quadsim/queries.hpp"
#include "quadsim/stl/trace.hpp"

#include "json.hpp"

namespace quadsim {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class ScenarioMode { Nominal, Saturation, Wind };

struct ScenarioSpec {
  ScenarioMode mode = ScenarioMode::Nominal;
  // saturation
  double factor_min = 0.8;
  double factor_max = 1.0;
  // wind
  double magnitude_cap = 10.0;
  double gust_half_life_min = 0.5;
  double gust_half_life_max = 2.0;
};

struct ControllerSpec {
  enum class Kind { Pid1, Pid2, Mlp };
  Kind kind = Kind::Pid2;
  std::string mlp_path;

  std::string label() const;
  static ControllerSpec parse(const std::string& text);  // pid1 | pid2 | mlp:<path>
};

struct InitialStateRanges {
  double angle_range = 0.1;  // rad, uniform on the three Euler angles
  double rate_range = 0.3;   // rad/s, uniform on the three body rates
};

struct EpisodeConfig {
  ControllerSpec controller{};
  std::string query_class_name = "medium";
  QueryClass query_class = QueryClass::medium();
  double horizon = 20.0;
  ScenarioSpec scenario{};
  std::uint64_t seed = 0;
  double control_period = 0.03;
  double sim_step = 0.01;
  InitialStateRanges initial{};
  ObservationSpec observation{};
  double z_setpoint = 0.0;
  RewardParams reward_params{};
  ObserverParams observer_params{};
  QuadParams params{};
  AeroParams aero{};
  QueryGenLimits query_limits{};

  void validate() const;
  nlohmann::json to_json() const;
  static EpisodeConfig from_json(const nlohmann::json& j);
  static EpisodeConfig load(const std::filesystem::path& file);
};

// Apply a JSON object of model-parameter overrides (keys named as in the
// parameter table: Ix, Iy, Iz, m, g, CT, CD, C1, C2, h, d, p_max, K).
void apply_param_overrides(QuadParams& params, AeroParams& aero, const nlohmann::json& j);

struct EpisodeResult {
  stl::Trace trace;
  QuerySignal query;
  std::optional<MotorFailure> failure;
  std::optional<GustSpec> gust;
  bool fault = false;
  double fault_time = 0.0;
  std::string fault_message;
};

// Closed-loop simulation of one episode; fully determined by the config
// (including its seed).
EpisodeResult run_episode(const EpisodeConfig& config);

struct CampaignOptions {
  int episodes = 100;
  int parallelism = 1;
  std::filesystem::path out_dir;  // empty: nothing is written
  bool write_traces = true;
};

struct CampaignResult {
  RunReport report;
  std::vector<EpisodeMetrics> per_episode;  // metrics of successful episodes, by index
  std::vector<int> failed;                  // episode indices that faulted
  std::string label;
};

// Seeds episode i with derive_seed(config.seed, i); outputs are identical
// for any parallelism degree.
CampaignResult run_campaign(const EpisodeConfig& base, const CampaignOptions& options);

// Training-style stepping interface for external trainers: 1-second episodes
// with plateau-then-zero queries; the action is the attitude command triple,
// thrust is regulated internally.
class EnvSession {
 public:
  explicit EnvSession(EpisodeConfig config);
  ~EnvSession();

  Eigen::VectorXd reset();

  struct StepResult {
    Eigen::VectorXd observation;
    double reward = 0.0;
    bool done = false;
  };
  StepResult step(const Vec3& action);

  int observation_dimension() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Newline-delimited JSON protocol driving an EnvSession:
//   {"cmd":"reset"}                    -> {"observation":[...]}
//   {"cmd":"step","action":[a,b,c]}    -> {"observation":[...],"reward":r,"done":b}
//   {"cmd":"close"}                    -> {"ok":true} and returns
// Malformed requests produce {"error":"..."} lines.
void run_env_protocol(std::istream& in, std::ostream& out, const EpisodeConfig& config);

struct ReportResult {
  RunReport report;
  int episodes_processed = 0;
  std::vector<std::string> skipped;  // unreadable episode files
};

// Rebuild the metrics table from the episode traces found in a run directory
// and emit per-episode (time, x, q) plot series under <run_dir>/plots.
ReportResult report_run(const std::filesystem::path& run_dir, std::ostream& table_out,
                        const ObserverParams& params = {});

}  // namespace quadsim
