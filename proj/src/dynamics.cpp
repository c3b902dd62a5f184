#include "quadsim/dynamics.hpp"

#include <cmath>

namespace quadsim {

void QuadParams::validate() const {
  const double vals[] = {Ix, Iy, Iz, m, g, CT, CD, C1, C2, h, d, p_max};
  for (double v : vals) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw SimulationFault("QuadParams: all parameters must be strictly positive");
  }
}

Pwm4 mix_pwm(const Command& cmd) {
  Pwm4 pwm;
  pwm[0] = cmd.thrust - 0.5 * cmd.cmd_phi - 0.5 * cmd.cmd_theta - cmd.cmd_psi;
  pwm[1] = cmd.thrust - 0.5 * cmd.cmd_phi + 0.5 * cmd.cmd_theta + cmd.cmd_psi;
  pwm[2] = cmd.thrust + 0.5 * cmd.cmd_phi + 0.5 * cmd.cmd_theta - cmd.cmd_psi;
  pwm[3] = cmd.thrust + 0.5 * cmd.cmd_phi - 0.5 * cmd.cmd_theta + cmd.cmd_psi;
  return pwm;
}

Command unmix_pwm(const Pwm4& pwm) {
  Command cmd;
  cmd.thrust = 0.25 * (pwm[0] + pwm[1] + pwm[2] + pwm[3]);
  cmd.cmd_phi = 0.5 * (-pwm[0] - pwm[1] + pwm[2] + pwm[3]);
  cmd.cmd_theta = 0.5 * (-pwm[0] + pwm[1] + pwm[2] - pwm[3]);
  cmd.cmd_psi = 0.25 * (-pwm[0] + pwm[1] - pwm[2] + pwm[3]);
  return cmd;
}

Omega4 pwm_to_omega(const Pwm4& pwm, const QuadParams& params) {
  return (params.C1 * pwm).array() + params.C2;
}

WrenchInput force_moments(const Command& cmd, const QuadParams& P) {
  const double t = cmd.thrust, cp = cmd.cmd_phi, ct = cmd.cmd_theta, cy = cmd.cmd_psi;
  const double C1sq = P.C1 * P.C1;
  WrenchInput w;
  w.F = P.CT * (C1sq * (ct * ct + cp * cp + 4.0 * cy * cy + 4.0 * t * t) +
                8.0 * P.C1 * P.C2 * t + 4.0 * P.C2 * P.C2);
  w.Mx = 4.0 * P.CT * P.d * (C1sq * (cp * t - ct * cy) + P.C1 * P.C2 * cp);
  w.My = 4.0 * P.CT * P.d * (C1sq * (ct * t - cp * cy) + P.C1 * P.C2 * ct);
  w.Mz = 2.0 * P.CD * (C1sq * (4.0 * cy * t - cp * ct) + 4.0 * P.C1 * P.C2 * cy);
  return w;
}

WrenchInput force_moments_pwm(const Pwm4& pwm, const QuadParams& P) {
  const Omega4 om = pwm_to_omega(pwm, P);
  const Eigen::Array4d o2 = om.array().square();
  WrenchInput w;
  w.F = P.CT * o2.sum();
  w.Mx = P.CT * P.d * (-o2[0] - o2[1] + o2[2] + o2[3]);
  w.My = P.CT * P.d * (-o2[0] + o2[1] + o2[2] - o2[3]);
  w.Mz = P.CD * (-o2[0] + o2[1] - o2[2] + o2[3]);
  return w;
}

std::pair<double, double> rotor_position_cs(int rotor_index) {
  if (rotor_index < 1 || rotor_index > 4)
    throw SimulationFault("rotor index must be in 1..4");
  const double angle = M_PI_2 * (rotor_index - 1) + 3.0 * M_PI / 4.0;
  return {std::sin(angle), std::cos(angle)};
}

Vec3 rotor_velocity(const QuadState& s, int rotor_index, const QuadParams& P) {
  const auto [cj, sj] = rotor_position_cs(rotor_index);
  return Vec3(s.q * P.h - s.r * P.d * sj + s.u,
              -s.p * P.h + s.r * P.d * cj + s.v,
              s.p * P.d * sj - s.q * P.d * cj + s.w);
}

Mat3 body_to_inertial(const QuadState& s) {
  const double cphi = std::cos(s.phi), sphi = std::sin(s.phi);
  const double cth = std::cos(s.theta), sth = std::sin(s.theta);
  const double cpsi = std::cos(s.psi), spsi = std::sin(s.psi);
  Mat3 R;
  R << cpsi * cth, cpsi * sth * sphi - cphi * spsi, spsi * sphi + cpsi * cphi * sth,
       cth * spsi, cpsi * cphi + spsi * sth * sphi, cphi * spsi * sth - cpsi * sphi,
       -sth, cth * sphi, cth * cphi;
  return R;
}

std::pair<Vec3, Vec3> aero_wrench(const QuadState& s, const Omega4& omegas,
                                  const Vec3& wind_abs, const AeroParams& aero,
                                  const QuadParams& P) {
  if (std::abs(std::cos(s.theta)) <= kCosThetaTolerance)
    throw SingularAttitudeError(s.theta);
  const Mat3 R = body_to_inertial(s);
  const Vec3 wind_body = R.transpose() * wind_abs;
  Vec3 Fa = Vec3::Zero();
  Vec3 Ma = Vec3::Zero();
  for (int j = 1; j <= 4; ++j) {
    const Vec3 rel = rotor_velocity(s, j, P) - wind_body;
    const Vec3 f = std::abs(omegas[j - 1]) * aero.drag_diag.cwiseProduct(rel);
    const auto [cj, sj] = rotor_position_cs(j);
    Fa += f;
    Ma += Vec3(P.d * cj, P.d * sj, P.h).cross(f);
  }
  return {Fa, Ma};
}

StateVec state_derivative(const QuadState& s, const WrenchInput& wr, const QuadParams& P) {
  const double cphi = std::cos(s.phi), sphi = std::sin(s.phi);
  const double cth = std::cos(s.theta), sth = std::sin(s.theta);
  if (std::abs(cth) <= kCosThetaTolerance) throw SingularAttitudeError(s.theta);
  const double tth = sth / cth;

  StateVec d;
  d[0] = -sth * s.u + cth * sphi * s.v + cth * cphi * s.w;                  // z'
  d[1] = s.r * s.v - s.q * s.w + sth * P.g + wr.Fa.x() / P.m;               // u'
  d[2] = -s.r * s.u + s.p * s.w - cth * sphi * P.g + wr.Fa.y() / P.m;       // v'
  d[3] = s.q * s.u - s.p * s.v - cth * cphi * P.g + (wr.F + wr.Fa.z()) / P.m;  // w'
  d[4] = s.p + cphi * tth * s.r + tth * sphi * s.q;                         // phi'
  d[5] = cphi * s.q - sphi * s.r;                                           // theta'
  d[6] = (cphi / cth) * s.r + (sphi / cth) * s.q;                           // psi'
  d[7] = (P.Iy - P.Iz) / P.Ix * s.q * s.r + (wr.Mx + wr.Ma.x()) / P.Ix;     // p'
  d[8] = (P.Iz - P.Ix) / P.Iy * s.p * s.r + (wr.My + wr.Ma.y()) / P.Iy;     // q'
  d[9] = (P.Ix - P.Iy) / P.Iz * s.p * s.q + (wr.Mz + wr.Ma.z()) / P.Iz;     // r'
  return d;
}

}  // namespace quadsim
