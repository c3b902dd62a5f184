#include "quadsim/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace quadsim {

Command clamp_command(const Command& cmd) {
  Command c;
  c.thrust = std::clamp(cmd.thrust, kThrustMin, kThrustMax);
  c.cmd_phi = std::clamp(cmd.cmd_phi, -kCmdPhiBound, kCmdPhiBound);
  c.cmd_theta = std::clamp(cmd.cmd_theta, -kCmdThetaBound, kCmdThetaBound);
  c.cmd_psi = std::clamp(cmd.cmd_psi, -kCmdPsiBound, kCmdPsiBound);
  return c;
}

Command pid1_step(const QuadState& s, const Setpoints& sp, PidState& pid, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("pid1_step: dt must be positive");
  const double ez = 2.0 * (sp.z_sp - s.z) - s.w;
  const double ep = sp.p_sp - s.p;
  const double eq = sp.q_sp - s.q;
  const double er = sp.r_sp - s.r;
  pid.int_z += ez * dt;
  pid.int_p += ep * dt;
  pid.int_q += eq * dt;
  pid.int_r += er * dt;

  Command c;
  c.thrust = 1000.0 * (25.0 * ez + 15.0 * pid.int_z) + 36000.0;
  c.cmd_phi = 250.0 * ep + 500.0 * pid.int_p;
  c.cmd_theta = 250.0 * eq + 500.0 * pid.int_q;
  c.cmd_psi = 120.0 * er + 16.7 * pid.int_r;

  pid.prev_z = s.z; pid.prev_p = s.p; pid.prev_q = s.q; pid.prev_r = s.r;
  pid.has_prev = true;
  return c;
}

Command pid2_step(const QuadState& s, const Setpoints& sp, PidState& pid, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("pid2_step: dt must be positive");
  const double dz = pid.has_prev ? (s.z - pid.prev_z) / dt : 0.0;
  const double dp = pid.has_prev ? (s.p - pid.prev_p) / dt : 0.0;
  const double dq = pid.has_prev ? (s.q - pid.prev_q) / dt : 0.0;
  const double dr = pid.has_prev ? (s.r - pid.prev_r) / dt : 0.0;

  const double ez = sp.z_sp - s.z;
  const double ep = sp.p_sp - s.p;
  const double eq = sp.q_sp - s.q;
  const double er = sp.r_sp - s.r;
  pid.int_z += ez * dt;
  pid.int_p += ep * dt;
  pid.int_q += eq * dt;
  pid.int_r += er * dt;

  Command c;
  c.thrust = 3000.0 * ez + 300.0 * pid.int_z - 500.0 * dz + 48500.0;
  c.cmd_phi = 1000.0 * ep + 400.0 * pid.int_p - 40.0 * dp;
  c.cmd_theta = 1000.0 * eq + 400.0 * pid.int_q - 40.0 * dq;
  c.cmd_psi = 2000.0 * er + 1000.0 * pid.int_r - 100.0 * dr;

  pid.prev_z = s.z; pid.prev_p = s.p; pid.prev_q = s.q; pid.prev_r = s.r;
  pid.has_prev = true;
  return c;
}

int ObservationSpec::dimension() const {
  switch (kind) {
    case ObservationKind::Dim3: return 3;
    case ObservationKind::Dim7: return 7;
    case ObservationKind::Dim3Failure: return 4;
    case ObservationKind::Dim3Wind: return 10;
  }
  return 0;
}

std::string ObservationSpec::name() const {
  switch (kind) {
    case ObservationKind::Dim3: return "dim3";
    case ObservationKind::Dim7: return "dim7";
    case ObservationKind::Dim3Failure: return "dim3_failure";
    case ObservationKind::Dim3Wind: return "dim3_wind";
  }
  return "?";
}

ObservationSpec ObservationSpec::from_name(const std::string& name) {
  if (name == "dim3") return {ObservationKind::Dim3};
  if (name == "dim7") return {ObservationKind::Dim7};
  if (name == "dim3_failure") return {ObservationKind::Dim3Failure};
  if (name == "dim3_wind") return {ObservationKind::Dim3Wind};
  throw PolicyFormatError("unknown observation space: " + name);
}

Eigen::VectorXd build_observation(const ObservationSpec& spec, const QuadState& s,
                                  const Setpoints& sp, double last_thrust,
                                  const std::optional<MotorFailure>& failure,
                                  const std::optional<GustSpec>& gust) {
  const double ep = sp.p_sp - s.p;
  const double eq = sp.q_sp - s.q;
  const double er = sp.r_sp - s.r;
  Eigen::VectorXd obs(spec.dimension());
  switch (spec.kind) {
    case ObservationKind::Dim3:
      obs << ep, eq, er;
      break;
    case ObservationKind::Dim7:
      obs << last_thrust, s.p, s.q, s.r, ep, eq, er;
      break;
    case ObservationKind::Dim3Failure:
      if (!failure)
        throw std::invalid_argument("observation dim3_failure requires failure info");
      obs << ep, eq, er, failure->factor;
      break;
    case ObservationKind::Dim3Wind:
      if (!gust)
        throw std::invalid_argument("observation dim3_wind requires gust info");
      obs << ep, eq, er, gust->peak, gust->direction.x(), gust->direction.y(),
          gust->direction.z(), s.u, s.v, s.w;
      break;
  }
  return obs;
}

void MlpPolicy::validate() const {
  if (layers.empty()) throw PolicyFormatError("policy has no layers");
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weight.rows() == 0 || l.weight.cols() == 0)
      throw PolicyFormatError("layer " + std::to_string(i) + " is empty");
    if (l.bias.size() != l.weight.rows())
      throw PolicyFormatError("layer " + std::to_string(i) + " bias/weight mismatch");
    if (i > 0 && layers[i - 1].weight.rows() != l.weight.cols())
      throw PolicyFormatError("dimension chain broken between layers " +
                              std::to_string(i - 1) + " and " + std::to_string(i));
  }
  if (layers.back().weight.rows() != 3)
    throw PolicyFormatError("output dimension must be 3");
}

MlpPolicy policy_from_json(const nlohmann::json& j) {
  MlpPolicy p;
  if (!j.contains("layers") || !j["layers"].is_array())
    throw PolicyFormatError("missing layers array");
  const std::string hidden = j.value("hidden_activation", "relu");
  const std::string output = j.value("output_activation", "tanh");
  if (hidden != "relu") throw PolicyFormatError("unknown hidden activation: " + hidden);
  if (output != "tanh") throw PolicyFormatError("unknown output activation: " + output);

  for (const auto& jl : j["layers"]) {
    if (!jl.contains("w") || !jl.contains("b"))
      throw PolicyFormatError("layer missing w or b");
    const auto& w = jl["w"];
    const auto& b = jl["b"];
    if (!w.is_array() || w.empty() || !w[0].is_array())
      throw PolicyFormatError("layer w must be a matrix");
    MlpLayer layer;
    const size_t rows = w.size();
    const size_t cols = w[0].size();
    layer.weight.resize(rows, cols);
    for (size_t i = 0; i < rows; ++i) {
      if (w[i].size() != cols) throw PolicyFormatError("ragged weight matrix");
      for (size_t k = 0; k < cols; ++k) layer.weight(i, k) = w[i][k].get<double>();
    }
    if (b.size() != rows) throw PolicyFormatError("bias size mismatch");
    layer.bias.resize(rows);
    for (size_t i = 0; i < rows; ++i) layer.bias[i] = b[i].get<double>();
    p.layers.push_back(std::move(layer));
  }

  if (j.contains("output_scale")) {
    const auto& sc = j["output_scale"];
    if (sc.size() != 3) throw PolicyFormatError("output_scale must have 3 entries");
    p.output_scale = Vec3(sc[0].get<double>(), sc[1].get<double>(), sc[2].get<double>());
  }
  if (j.contains("observation"))
    p.observation = ObservationSpec::from_name(j["observation"].get<std::string>());
  p.validate();
  if (p.input_dim() != p.observation.dimension())
    throw PolicyFormatError("policy input dimension " + std::to_string(p.input_dim()) +
                            " does not match observation space " + p.observation.name());
  return p;
}

MlpPolicy load_policy(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw PolicyFormatError("cannot open policy file: " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw PolicyFormatError("policy parse error: " + std::string(e.what()));
  }
  return policy_from_json(j);
}

Vec3 policy_step(const MlpPolicy& policy, const Eigen::VectorXd& obs) {
  if (obs.size() != policy.input_dim())
    throw std::invalid_argument("observation dimension does not match policy input");
  Eigen::VectorXd x = obs;
  for (size_t i = 0; i + 1 < policy.layers.size(); ++i)
    x = (policy.layers[i].weight * x + policy.layers[i].bias).cwiseMax(0.0);
  const auto& out = policy.layers.back();
  Eigen::VectorXd y = (out.weight * x + out.bias).array().tanh();
  return Vec3(y[0] * policy.output_scale[0], y[1] * policy.output_scale[1],
              y[2] * policy.output_scale[2]);
}

}  // namespace quadsim
