#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>

namespace quadsim {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Pwm4 = Eigen::Vector4d;
using Omega4 = Eigen::Vector4d;
using StateVec = Eigen::Matrix<double, 10, 1>;

// Fault raised by the simulation layer instead of letting NaNs propagate.
class SimulationFault : public std::runtime_error {
 public:
  explicit SimulationFault(const std::string& what) : std::runtime_error(what) {}
};

// |cos(theta)| fell below the tolerance; the Euler-angle kinematics divide
// by cos(theta) and are no longer meaningful.
class SingularAttitudeError : public SimulationFault {
 public:
  explicit SingularAttitudeError(double theta)
      : SimulationFault("singular attitude: |theta| too close to pi/2 (theta=" +
                        std::to_string(theta) + ")") {}
};

constexpr double kCosThetaTolerance = 1e-6;

// 10-dimensional rigid-body state: altitude, body-frame linear velocities,
// Euler angles, body angular rates.
struct QuadState {
  double z = 0.0;
  double u = 0.0, v = 0.0, w = 0.0;
  double phi = 0.0, theta = 0.0, psi = 0.0;
  double p = 0.0, q = 0.0, r = 0.0;

  StateVec vec() const {
    StateVec s;
    s << z, u, v, w, phi, theta, psi, p, q, r;
    return s;
  }

  static QuadState from_vec(const StateVec& s) {
    return QuadState{s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7], s[8], s[9]};
  }

  bool finite() const { return vec().allFinite(); }
};

// Physical constants of the crazyflie 2.0 model.
struct QuadParams {
  double Ix = 1.657171e-5;    // inertia about x (kg m^2)
  double Iy = 1.6655602e-5;   // inertia about y (kg m^2)
  double Iz = 2.9261652e-5;   // inertia about z (kg m^2)
  double m = 0.028;           // mass (kg)
  double g = 9.81;            // gravity (m/s^2)
  double CT = 1.285e-8;       // thrust coefficient
  double CD = 7.645e-11;      // torque coefficient
  double C1 = 0.04076521;     // PWM -> rotor speed factor
  double C2 = 380.8359;       // PWM -> rotor speed bias
  double h = 0.005;           // rotor z offset wrt CoG (m)
  double d = 0.046 / 1.4142135623730951;  // arm length (m)
  double p_max = 65535.0;     // maximum motor PWM

  void validate() const;
};

// The four abstract controls, PWM scale.
struct Command {
  double thrust = 0.0;
  double cmd_phi = 0.0;
  double cmd_theta = 0.0;
  double cmd_psi = 0.0;
};

// Induced-drag model: diagonal of the drag coefficient matrix K (kg/rad).
struct AeroParams {
  Vec3 drag_diag{-9.1785e-7, -9.1785e-7, -10.311e-7};
};

// Inputs to the rigid-body equations: total thrust, body moments, and the
// aerodynamic force/moment contributions (zero in the nominal model).
struct WrenchInput {
  double F = 0.0;
  double Mx = 0.0, My = 0.0, Mz = 0.0;
  Vec3 Fa = Vec3::Zero();
  Vec3 Ma = Vec3::Zero();
};

// Fixed command-to-motor mixing matrix. No clamping here; saturation is a
// separate stage (see faults.hpp).
Pwm4 mix_pwm(const Command& cmd);

// Exact inverse of the mixing matrix (columns are orthogonal).
Command unmix_pwm(const Pwm4& pwm);

// Elementwise affine map omega_i = C1 * pwm_i + C2.
Omega4 pwm_to_omega(const Pwm4& pwm, const QuadParams& params);

// Force and moments as degree-2 polynomials in the four commands.
WrenchInput force_moments(const Command& cmd, const QuadParams& params);

// Same quantities from per-motor squared rotor speeds; agrees with
// force_moments when pwm = mix_pwm(cmd), but remains valid after per-motor
// saturation.
WrenchInput force_moments_pwm(const Pwm4& pwm, const QuadParams& params);

// In-plane rotor position angle helpers: (c_j, s_j) such that
// (d*c_j, d*s_j, h) is the position of rotor j in the body frame.
std::pair<double, double> rotor_position_cs(int rotor_index);

// Body-frame linear velocity of rotor j (1..4) induced by body motion.
Vec3 rotor_velocity(const QuadState& state, int rotor_index, const QuadParams& params);

// Rotation matrix from body frame to inertial frame (its inverse is its
// transpose).
Mat3 body_to_inertial(const QuadState& state);

// Induced-drag force and moment from the four rotors given the absolute
// wind velocity in the inertial frame. Returns (Fa, Ma) in the body frame.
std::pair<Vec3, Vec3> aero_wrench(const QuadState& state, const Omega4& omegas,
                                  const Vec3& wind_abs, const AeroParams& aero,
                                  const QuadParams& params);

// Right-hand side of the 10-dimensional ODE, including the aerodynamic
// additions carried by the wrench (nominal case: Fa = Ma = 0).
StateVec state_derivative(const QuadState& state, const WrenchInput& wrench,
                          const QuadParams& params);

// Classical 4-stage Runge-Kutta step. The wrench provider is invoked at each
// stage with the intermediate state and stage time (commands are held by the
// caller; aerodynamics may be re-evaluated).
template <class WrenchFn>
QuadState rk4_step(const QuadState& state, double t, double dt,
                   const QuadParams& params, WrenchFn&& wrench) {
  if (!(dt > 0.0)) throw SimulationFault("rk4_step: dt must be positive");
  const auto deriv = [&](const QuadState& x, double tau) {
    return state_derivative(x, wrench(x, tau), params);
  };
  const StateVec y = state.vec();
  const StateVec k1 = deriv(state, t);
  const StateVec k2 = deriv(QuadState::from_vec(y + (0.5 * dt) * k1), t + 0.5 * dt);
  const StateVec k3 = deriv(QuadState::from_vec(y + (0.5 * dt) * k2), t + 0.5 * dt);
  const StateVec k4 = deriv(QuadState::from_vec(y + dt * k3), t + dt);
  QuadState next = QuadState::from_vec(y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  if (!next.finite()) throw SimulationFault("rk4_step: non-finite state");
  return next;
}

}  // namespace quadsim
