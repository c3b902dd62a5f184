#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "quadsim/controllers.hpp"
#include "quadsim/rng.hpp"

using namespace quadsim;

TEST_CASE("pid1 biases and proportional terms") {
  PidState pid;
  QuadState rest;
  const Command at_rest = pid1_step(rest, Setpoints{}, pid, 0.03);
  CHECK(at_rest.thrust == doctest::Approx(36000.0));
  CHECK(at_rest.cmd_phi == 0.0);
  CHECK(at_rest.cmd_theta == 0.0);
  CHECK(at_rest.cmd_psi == 0.0);

  // With dt -> 0 the integral contribution vanishes: pure proportional.
  pid.reset();
  const Command prop = pid1_step(rest, Setpoints{0, 0.1, 0, 0}, pid, 1e-12);
  CHECK(prop.cmd_phi == doctest::Approx(25.0).epsilon(1e-9));

  // Rectangle rule: err_r = 0.1 held for two steps of dt = 0.03.
  pid.reset();
  Command c = pid1_step(rest, Setpoints{0, 0, 0, 0.1}, pid, 0.03);
  CHECK(c.cmd_psi == doctest::Approx(120 * 0.1 + 16.7 * (0.1 * 0.03)).epsilon(1e-12));
  c = pid1_step(rest, Setpoints{0, 0, 0, 0.1}, pid, 0.03);
  CHECK(c.cmd_psi == doctest::Approx(120 * 0.1 + 16.7 * (0.1 * 0.06)).epsilon(1e-12));
  CHECK(c.cmd_psi == doctest::Approx(12.1).epsilon(1e-3));
}

TEST_CASE("pid2 biases, first step and derivative term") {
  PidState pid;
  QuadState rest;
  const Command at_rest = pid2_step(rest, Setpoints{}, pid, 0.03);
  CHECK(at_rest.thrust == doctest::Approx(48500.0));
  CHECK(at_rest.cmd_phi == 0.0);
  CHECK(at_rest.cmd_psi == 0.0);

  // First step from rest with err_q = 0.1: derivative fd is 0.
  pid.reset();
  const double dt = 0.03;
  const Command first = pid2_step(rest, Setpoints{0, 0, 0.1, 0}, pid, dt);
  CHECK(first.cmd_theta == doctest::Approx(1000 * 0.1 + 400 * 0.1 * dt).epsilon(1e-12));

  // Step change of +1 in p between two steps, zero error afterwards:
  // only the derivative remains, -40 * (1 / 0.03).
  pid.reset();
  QuadState s0;
  pid2_step(s0, Setpoints{0, 0, 0, 0}, pid, dt);
  QuadState s1;
  s1.p = 1.0;
  const Command jump = pid2_step(s1, Setpoints{0, 1.0, 0, 0}, pid, dt);
  CHECK(jump.cmd_phi == doctest::Approx(-40.0 / dt).epsilon(1e-9));
  CHECK(jump.cmd_phi == doctest::Approx(-1333.33).epsilon(1e-3));
}

TEST_CASE("pid outputs are affine in errors and integrals") {
  QuadState rest;
  Rng rng(31);
  for (int i = 0; i < 50; ++i) {
    const Setpoints sp{0, rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    const Setpoints sp2{0, 2 * sp.p_sp, 2 * sp.q_sp, 2 * sp.r_sp};
    for (bool second : {false, true}) {
      PidState a, b;
      a.int_p = 0.01;
      a.int_q = -0.02;
      a.int_r = 0.005;
      b.int_p = 0.02;
      b.int_q = -0.04;
      b.int_r = 0.01;
      const Command ca = second ? pid2_step(rest, sp, a, 0.03) : pid1_step(rest, sp, a, 0.03);
      const Command cb = second ? pid2_step(rest, sp2, b, 0.03) : pid1_step(rest, sp2, b, 0.03);
      CHECK(cb.cmd_phi == doctest::Approx(2 * ca.cmd_phi).epsilon(1e-9));
      CHECK(cb.cmd_theta == doctest::Approx(2 * ca.cmd_theta).epsilon(1e-9));
      CHECK(cb.cmd_psi == doctest::Approx(2 * ca.cmd_psi).epsilon(1e-9));
      const double bias = second ? 48500.0 : 36000.0;
      CHECK(cb.thrust - bias == doctest::Approx(2 * (ca.thrust - bias)).epsilon(1e-9));
    }
  }
}

TEST_CASE("clamp_command bounds") {
  const Command wild{90000, 700, -900, 3000};
  const Command c = clamp_command(wild);
  CHECK(c.thrust == 52428.0);
  CHECK(c.cmd_phi == 400.0);
  CHECK(c.cmd_theta == -400.0);
  CHECK(c.cmd_psi == 1000.0);
  const Command neg{-50, 0, 0, 0};
  CHECK(clamp_command(neg).thrust == 0.0);
}

namespace {

nlohmann::json layer_json(const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
  nlohmann::json jl;
  for (int i = 0; i < w.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < w.cols(); ++j) row.push_back(w(i, j));
    jl["w"].push_back(row);
  }
  for (int i = 0; i < b.size(); ++i) jl["b"].push_back(b[i]);
  return jl;
}

nlohmann::json random_policy_json(Rng& rng, const std::vector<int>& dims, double scale = 1.0) {
  nlohmann::json j;
  j["hidden_activation"] = "relu";
  j["output_activation"] = "tanh";
  j["output_scale"] = {400.0, 400.0, 1000.0};
  j["observation"] = dims.front() == 3 ? "dim3" : (dims.front() == 7 ? "dim7" : "dim3");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    Eigen::VectorXd b(dims[l + 1]);
    for (int i = 0; i < w.rows(); ++i) {
      b[i] = scale * rng.uniform(-1, 1);
      for (int k = 0; k < w.cols(); ++k) w(i, k) = scale * rng.uniform(-1, 1);
    }
    j["layers"].push_back(layer_json(w, b));
  }
  return j;
}

// Plain-loop forward pass, independent of the Eigen implementation.
std::vector<double> forward_oracle(const nlohmann::json& j, const std::vector<double>& obs) {
  std::vector<double> x = obs;
  const auto& layers = j["layers"];
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l]["w"];
    const auto& b = layers[l]["b"];
    std::vector<double> y(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      double acc = b[i].get<double>();
      for (std::size_t k = 0; k < x.size(); ++k) acc += w[i][k].get<double>() * x[k];
      y[i] = acc;
    }
    if (l + 1 < layers.size()) {
      for (auto& v : y) v = std::max(0.0, v);
    } else {
      for (std::size_t i = 0; i < y.size(); ++i)
        y[i] = std::tanh(y[i]) * j["output_scale"][i].get<double>();
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_CASE("policy_step forward pass against a plain-loop oracle") {
  Rng rng(32);
  const auto j = random_policy_json(rng, {3, 16, 16, 3});
  const MlpPolicy policy = policy_from_json(j);
  CHECK(policy.layers.size() == 3);

  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd obs(3);
    std::vector<double> obs_v(3);
    for (int k = 0; k < 3; ++k) obs_v[k] = obs[k] = rng.uniform(-1, 1);
    const Vec3 got = policy_step(policy, obs);
    const auto want = forward_oracle(j, obs_v);
    for (int k = 0; k < 3; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));
  }
}

TEST_CASE("policy_step degenerate cases") {
  // All-zero single layer: tanh(0) = 0.
  nlohmann::json j;
  j["hidden_activation"] = "relu";
  j["output_activation"] = "tanh";
  j["observation"] = "dim3";
  j["layers"].push_back(layer_json(Eigen::MatrixXd::Zero(3, 3), Eigen::VectorXd::Zero(3)));
  const MlpPolicy zero = policy_from_json(j);
  CHECK(policy_step(zero, Eigen::VectorXd::Ones(3)) == Vec3::Zero());

  // Huge positive bias on channel 1 saturates to the +400 asymptote.
  Eigen::VectorXd bias = Eigen::VectorXd::Zero(3);
  bias[0] = 50.0;
  j["layers"][0] = layer_json(Eigen::MatrixXd::Zero(3, 3), bias);
  const MlpPolicy sat = policy_from_json(j);
  CHECK(policy_step(sat, Eigen::VectorXd::Zero(3))[0] == doctest::Approx(400.0));
}

TEST_CASE("policy outputs stay inside the action bounds") {
  Rng rng(33);
  const auto j = random_policy_json(rng, {3, 8, 3}, 2.0);
  const MlpPolicy policy = policy_from_json(j);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd obs(3);
    for (int k = 0; k < 3; ++k) obs[k] = rng.uniform(-3, 3);
    const Vec3 out = policy_step(policy, obs);
    CHECK(std::abs(out[0]) < 400.0);
    CHECK(std::abs(out[1]) < 400.0);
    CHECK(std::abs(out[2]) < 1000.0);
    // Deterministic.
    CHECK(policy_step(policy, obs) == out);
  }
}

TEST_CASE("load_policy validation errors") {
  Rng rng(34);
  // Dimension chain broken: 16 -> then expects 16 inputs, gets 32.
  nlohmann::json bad = random_policy_json(rng, {3, 16, 3});
  bad["layers"][1]["w"] = random_policy_json(rng, {32, 3})["layers"][0]["w"];
  CHECK_THROWS_AS(policy_from_json(bad), PolicyFormatError);

  nlohmann::json act = random_policy_json(rng, {3, 8, 3});
  act["hidden_activation"] = "sigmoid";
  CHECK_THROWS_AS(policy_from_json(act), PolicyFormatError);

  nlohmann::json out_act = random_policy_json(rng, {3, 8, 3});
  out_act["output_activation"] = "linear";
  CHECK_THROWS_AS(policy_from_json(out_act), PolicyFormatError);

  // No hidden layers: a direct affine + tanh policy is valid.
  nlohmann::json direct = random_policy_json(rng, {3, 3});
  CHECK_NOTHROW(policy_from_json(direct));

  // Observation/input mismatch.
  nlohmann::json mism = random_policy_json(rng, {3, 8, 3});
  mism["observation"] = "dim7";
  CHECK_THROWS_AS(policy_from_json(mism), PolicyFormatError);

  // Round-trip through a file.
  const auto path = std::filesystem::temp_directory_path() / "quadsim_test_policy.json";
  {
    std::ofstream f(path);
    f << random_policy_json(rng, {3, 4, 3}).dump();
  }
  CHECK_NOTHROW(load_policy(path));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_policy(path), PolicyFormatError);
}

TEST_CASE("build_observation layouts") {
  QuadState s;
  s.p = 0.1;
  s.q = -0.2;
  s.r = 0.3;
  s.u = 1.0;
  s.v = 2.0;
  s.w = 3.0;
  const Setpoints sp{0, 0.1, -0.2, 0.3};

  const auto dim3 = build_observation(ObservationSpec{ObservationKind::Dim3}, s, sp, 0, {}, {});
  CHECK(dim3.size() == 3);
  CHECK(dim3.cwiseAbs().maxCoeff() == 0.0);

  // dim7 ordering: thrust, p, q, r, err_p, err_q, err_r.
  const Setpoints sp2{0, 0.5, 0.0, 0.0};
  const auto dim7 =
      build_observation(ObservationSpec{ObservationKind::Dim7}, s, sp2, 47000.0, {}, {});
  CHECK(dim7.size() == 7);
  CHECK(dim7[0] == 47000.0);
  CHECK(dim7[1] == doctest::Approx(0.1));
  CHECK(dim7[2] == doctest::Approx(-0.2));
  CHECK(dim7[3] == doctest::Approx(0.3));
  CHECK(dim7[4] == doctest::Approx(0.4));
  CHECK(dim7[5] == doctest::Approx(0.2));
  CHECK(dim7[6] == doctest::Approx(-0.3));

  const MotorFailure failure{0.85, 1};
  const auto dim4 = build_observation(ObservationSpec{ObservationKind::Dim3Failure}, s, sp,
                                      0, failure, {});
  CHECK(dim4.size() == 4);
  CHECK(dim4[3] == doctest::Approx(0.85));

  GustSpec gust;
  gust.peak = 7.5;
  gust.direction = Vec3(0, 1, 0);
  const auto dim10 =
      build_observation(ObservationSpec{ObservationKind::Dim3Wind}, s, sp, 0, {}, gust);
  CHECK(dim10.size() == 10);
  CHECK(dim10[3] == doctest::Approx(7.5));
  CHECK(dim10[4] == 0.0);
  CHECK(dim10[5] == 1.0);
  CHECK(dim10[6] == 0.0);
  CHECK(dim10[7] == 1.0);
  CHECK(dim10[8] == 2.0);
  CHECK(dim10[9] == 3.0);

  CHECK_THROWS_AS(
      build_observation(ObservationSpec{ObservationKind::Dim3Failure}, s, sp, 0, {}, {}),
      std::invalid_argument);
  CHECK_THROWS_AS(build_observation(ObservationSpec{ObservationKind::Dim3Wind}, s, sp, 0, {}, {}),
                  std::invalid_argument);
}
