#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "quadsim/dynamics.hpp"
#include "quadsim/faults.hpp"

#include "json.hpp"

namespace quadsim {

class PolicyFormatError : public std::runtime_error {
 public:
  explicit PolicyFormatError(const std::string& what) : std::runtime_error(what) {}
};

struct Setpoints {
  double z_sp = 0.0;
  double p_sp = 0.0, q_sp = 0.0, r_sp = 0.0;
};

// Action-space bounds (thrust, cmd_phi, cmd_theta, cmd_psi).
constexpr double kThrustMin = 0.0;
constexpr double kThrustMax = 52428.0;
constexpr double kCmdPhiBound = 400.0;
constexpr double kCmdThetaBound = 400.0;
constexpr double kCmdPsiBound = 1000.0;

Command clamp_command(const Command& cmd);

// Per-episode PID memory: integral accumulators and previous measurements
// for the finite-difference derivative terms. Reset on episode start.
struct PidState {
  double int_z = 0.0, int_p = 0.0, int_q = 0.0, int_r = 0.0;
  double prev_z = 0.0, prev_p = 0.0, prev_q = 0.0, prev_r = 0.0;
  bool has_prev = false;

  void reset() { *this = PidState{}; }
};

// Stock crazyflie-style attitude/altitude PID. Integrals advance by the
// rectangle rule (err * dt, before the output is formed).
Command pid1_step(const QuadState& state, const Setpoints& sp, PidState& pid, double dt);

// More reactive PID with derivative terms; derivatives are backward finite
// differences of the measured signals (zero on the first step).
Command pid2_step(const QuadState& state, const Setpoints& sp, PidState& pid, double dt);

enum class ObservationKind { Dim3, Dim7, Dim3Failure, Dim3Wind };

struct ObservationSpec {
  ObservationKind kind = ObservationKind::Dim3;

  int dimension() const;
  std::string name() const;
  static ObservationSpec from_name(const std::string& name);
};

// Observation vector layouts:
//   dim3:         (err_p, err_q, err_r)
//   dim7:         (thrust, p, q, r, err_p, err_q, err_r)
//   dim3_failure: dim3 + (factor)
//   dim3_wind:    dim3 + (Ag, Vd_x, Vd_y, Vd_z) + (u, v, w)
Eigen::VectorXd build_observation(const ObservationSpec& spec, const QuadState& state,
                                  const Setpoints& sp, double last_thrust,
                                  const std::optional<MotorFailure>& failure,
                                  const std::optional<GustSpec>& gust);

struct MlpLayer {
  Eigen::MatrixXd weight;  // rows = outputs, cols = inputs
  Eigen::VectorXd bias;
};

// Feed-forward policy: RELU hidden layers, tanh output rescaled to the
// attitude action bounds. Immutable after load; safe to share across threads.
struct MlpPolicy {
  std::vector<MlpLayer> layers;
  Vec3 output_scale{kCmdPhiBound, kCmdThetaBound, kCmdPsiBound};
  ObservationSpec observation{};

  int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
  void validate() const;
};

MlpPolicy policy_from_json(const nlohmann::json& j);
MlpPolicy load_policy(const std::filesystem::path& file);

// Forward pass; returns the three attitude commands (thrust is supplied by
// an altitude PID elsewhere).
Vec3 policy_step(const MlpPolicy& policy, const Eigen::VectorXd& obs);

}  // namespace quadsim
