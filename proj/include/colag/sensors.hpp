#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "colag/geometry.hpp"
#include "colag/rng.hpp"
#include "colag/scenario.hpp"

namespace colag {

struct LidarBeam {
  double azimuth = 0.0;  // world frame
  double range = 0.0;
  bool hit = false;
};

struct LidarScan {
  Vec2 origin{0.0, 0.0};
  double max_range = 8.0;
  double stamp = 0.0;
  std::vector<LidarBeam> beams;
};

/// Ideal planar scan against the true obstacle field: evenly spaced beams,
/// each reporting the first disk intersection within range. Beams that hit
/// nothing report max_range with hit = false.
inline LidarScan simulate_lidar(const Vec2& origin, const Scenario& sc, double max_range,
                                int beam_count, double stamp = 0.0) {
  if (beam_count <= 0 || max_range <= 0.0)
    throw std::invalid_argument("simulate_lidar: bad beam count or range");
  LidarScan scan;
  scan.origin = origin;
  scan.max_range = max_range;
  scan.stamp = stamp;
  scan.beams.resize(beam_count);
  for (int k = 0; k < beam_count; ++k) {
    const double az = 2.0 * kPi * k / beam_count;
    const Vec2 dir(std::cos(az), std::sin(az));
    double best = max_range;
    bool hit = false;
    for (const auto& d : sc.obstacles) {
      const auto t = ray_disk_first_hit(origin, dir, d.center, d.radius);
      if (t && *t < best) {
        best = *t;
        hit = true;
      }
    }
    scan.beams[k] = LidarBeam{az, best, hit};
  }
  return scan;
}

/// Body-frame velocity command plus measurement noise, as the filter sees it.
struct WheelOdomSample {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
  double stamp = 0.0;
};

struct OdomNoise {
  double sigma_vx = 0.0336;
  double sigma_vy = 0.005;
  double sigma_omega = 0.0292;
};

/// True twist corrupted by per-axis white noise. Draw order: vx, vy, omega.
inline WheelOdomSample sample_wheel_odometry(double vx, double vy, double omega,
                                             const OdomNoise& noise, RngStream& rng,
                                             double stamp) {
  WheelOdomSample s;
  s.vx = vx + rng.gaussian(0.0, noise.sigma_vx);
  s.vy = vy + rng.gaussian(0.0, noise.sigma_vy);
  s.omega = omega + rng.gaussian(0.0, noise.sigma_omega);
  s.stamp = stamp;
  return s;
}

/// World-frame pose fix for one UGV, assembled by the observer from its own
/// pose estimate composed with the noisy relative detection.
struct RelPoseMeasurement {
  int ugv_id = -1;
  Vec3 pose{0.0, 0.0, 0.0};  // x, y, theta
  Mat3 cov = Mat3::Zero();
  double stamp = 0.0;
};

struct RpeParams {
  double range = 5.0;
  double sigma_pos = 0.2;
  double sigma_theta = 0.05;
  double fov_half_angle = -1.0;  // < 0 disables the bearing gate
};

/// True iff the segment between two points crosses no obstacle.
inline bool line_of_sight(const Vec2& a, const Vec2& b, const Scenario& sc) {
  for (const auto& d : sc.obstacles)
    if (segment_intersects_disk(a, b, d.center, d.radius)) return false;
  return true;
}

/// Relative pose estimation: the observer detects the target if it is within
/// range, inside the field of view, and unoccluded; the body-frame relative
/// pose is perturbed (draw order px, py, theta) and composed with the
/// observer's own pose estimate into a world-frame measurement. nullopt means
/// no detection this cycle, which is a normal outcome.
inline std::optional<RelPoseMeasurement> measure_relative_pose(
    const Pose2& observer_true, const Pose2& observer_estimate, const Pose2& target_true,
    int target_id, const Scenario& sc, const RpeParams& params, RngStream& rng,
    double stamp) {
  const Vec2 offset = target_true.p - observer_true.p;
  const double dist = offset.norm();
  if (dist > params.range) return std::nullopt;
  if (params.fov_half_angle >= 0.0 && dist > 1e-12) {
    const double bearing = wrap_angle(std::atan2(offset.y(), offset.x()) - observer_true.theta);
    if (std::abs(bearing) > params.fov_half_angle) return std::nullopt;
  }
  if (!line_of_sight(observer_true.p, target_true.p, sc)) return std::nullopt;

  const Vec2 rel_p = rot2(-observer_true.theta) * offset +
                     Vec2(rng.gaussian(0.0, params.sigma_pos), rng.gaussian(0.0, params.sigma_pos));
  const double rel_theta =
      wrap_angle(target_true.theta - observer_true.theta + rng.gaussian(0.0, params.sigma_theta));

  RelPoseMeasurement z;
  z.ugv_id = target_id;
  const Vec2 wp = observer_estimate.p + rot2(observer_estimate.theta) * rel_p;
  z.pose << wp.x(), wp.y(), wrap_angle(observer_estimate.theta + rel_theta);
  z.cov = Mat3::Zero();
  z.cov(0, 0) = params.sigma_pos * params.sigma_pos;
  z.cov(1, 1) = params.sigma_pos * params.sigma_pos;
  z.cov(2, 2) = params.sigma_theta * params.sigma_theta;
  z.stamp = stamp;
  return z;
}

}  // namespace colag
