#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "colag/geometry.hpp"
#include "colag/sensors.hpp"

namespace colag {

/// Gaussian pose belief over (x, y, theta).
struct Belief {
  Vec3 mean{0.0, 0.0, 0.0};
  Mat3 cov = Mat3::Zero();
  double stamp = 0.0;
  bool initialized = false;

  Vec2 position() const { return mean.head<2>(); }
  double heading() const { return mean(2); }
};

struct NoiseModel {
  Mat3 control_cov = Mat3::Zero();  // body-frame twist noise (vx, vy, omega)
  Mat3 meas_cov = Mat3::Zero();     // pose-fix noise (x, y, theta)

  static NoiseModel from_sigmas(double sigma_vx, double sigma_vy, double sigma_omega,
                                double sigma_p = 0.0, double sigma_theta = 0.0) {
    NoiseModel n;
    n.control_cov(0, 0) = sigma_vx * sigma_vx;
    n.control_cov(1, 1) = sigma_vy * sigma_vy;
    n.control_cov(2, 2) = sigma_omega * sigma_omega;
    n.meas_cov(0, 0) = sigma_p * sigma_p;
    n.meas_cov(1, 1) = sigma_p * sigma_p;
    n.meas_cov(2, 2) = sigma_theta * sigma_theta;
    return n;
  }
  static NoiseModel from_params(const OdomNoise& o, const RpeParams& r) {
    return from_sigmas(o.sigma_vx, o.sigma_vy, o.sigma_omega, r.sigma_pos, r.sigma_theta);
  }
};

/// Euler step of the unicycle-with-slip model: the body twist is rotated by
/// the *current* heading, then heading advances.
inline Vec3 transition(const Vec3& x, const Vec3& u, double dt) {
  Vec3 out;
  out.head<2>() = x.head<2>() + rot2(x(2)) * u.head<2>() * dt;
  out(2) = wrap_angle(x(2) + u(2) * dt);
  return out;
}

inline Vec3 transition(const Vec3& x, const WheelOdomSample& u, double dt) {
  return transition(x, Vec3(u.vx, u.vy, u.omega), dt);
}

/// Jacobians of `transition` w.r.t. state (F) and control (B).
inline void transition_jacobians(const Vec3& x, const Vec3& u, double dt, Mat3& F, Mat3& B) {
  const double c = std::cos(x(2)), s = std::sin(x(2));
  F = Mat3::Identity();
  F(0, 2) = (-s * u(0) - c * u(1)) * dt;
  F(1, 2) = (c * u(0) - s * u(1)) * dt;
  B = Mat3::Zero();
  B(0, 0) = c * dt;
  B(0, 1) = -s * dt;
  B(1, 0) = s * dt;
  B(1, 1) = c * dt;
  B(2, 2) = dt;
}

/// Symmetrize and clamp tiny negative eigenvalues so covariances stay PSD
/// through long predict chains.
inline Mat3 sanitize_covariance(const Mat3& P) {
  Mat3 sym = 0.5 * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> es(sym);
  if (es.eigenvalues().minCoeff() >= 0.0) return sym;
  Vec3 ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// EKF time update driven by an odometry sample.
inline Belief ekf_predict(const Belief& belief, const Vec3& u, double dt,
                          const NoiseModel& noise) {
  if (!belief.initialized) throw std::logic_error("ekf_predict: belief not initialized");
  Mat3 F, B;
  transition_jacobians(belief.mean, u, dt, F, B);
  Belief out;
  out.mean = transition(belief.mean, u, dt);
  out.cov = sanitize_covariance(F * belief.cov * F.transpose() +
                                B * noise.control_cov * B.transpose());
  out.stamp = belief.stamp + dt;
  out.initialized = true;
  return out;
}

inline Belief ekf_predict(const Belief& belief, const WheelOdomSample& u, double dt,
                          const NoiseModel& noise) {
  return ekf_predict(belief, Vec3(u.vx, u.vy, u.omega), dt, noise);
}

/// EKF measurement update with a full-state pose fix (identity measurement
/// model). The angular innovation is wrapped; Joseph form keeps the
/// covariance PSD.
inline Belief ekf_update(const Belief& belief, const RelPoseMeasurement& z) {
  if (!belief.initialized) throw std::logic_error("ekf_update: belief not initialized");
  if (!z.pose.allFinite() || !z.cov.allFinite())
    throw std::invalid_argument("ekf_update: non-finite measurement");

  Vec3 innovation = z.pose - belief.mean;
  innovation(2) = wrap_angle(innovation(2));

  const Mat3 S = belief.cov + z.cov;
  const Mat3 K = belief.cov * S.inverse();

  Belief out;
  out.mean = belief.mean + K * innovation;
  out.mean(2) = wrap_angle(out.mean(2));
  const Mat3 ikh = Mat3::Identity() - K;
  out.cov = sanitize_covariance(ikh * belief.cov * ikh.transpose() + K * z.cov * K.transpose());
  out.stamp = belief.stamp;
  out.initialized = true;
  return out;
}

/// First fix becomes the belief outright; the initial covariance defaults to
/// the measurement's own.
inline Belief initialize_belief(const RelPoseMeasurement& z, const Mat3& initial_cov) {
  if (!z.pose.allFinite() || !z.cov.allFinite())
    throw std::invalid_argument("initialize_belief: non-finite measurement");
  Belief b;
  b.mean = z.pose;
  b.mean(2) = wrap_angle(b.mean(2));
  b.cov = sanitize_covariance(initial_cov);
  b.stamp = z.stamp;
  b.initialized = true;
  return b;
}

inline Belief initialize_belief(const RelPoseMeasurement& z) {
  return initialize_belief(z, z.cov);
}

}  // namespace colag
