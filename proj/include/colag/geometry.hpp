#pragma once

#include <Eigen/Core>
#include <cmath>
#include <optional>

namespace colag {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

constexpr double kPi = 3.141592653589793238462643383279502884;

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

inline Mat2 rot2(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

/// Planar pose; theta kept in (-pi, pi].
struct Pose2 {
  Vec2 p{0.0, 0.0};
  double theta = 0.0;
};

inline double sq(double x) { return x * x; }

/// Smallest t >= 0 with ||o + t*d - c|| == r, for unit direction d.
inline std::optional<double> ray_disk_first_hit(const Vec2& origin, const Vec2& dir,
                                                const Vec2& center, double radius) {
  const Vec2 oc = center - origin;
  const double b = dir.dot(oc);
  const double disc = b * b - (oc.squaredNorm() - radius * radius);
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  const double t0 = b - root;
  if (t0 >= 0.0) return t0;
  const double t1 = b + root;
  if (t1 >= 0.0) return t1;
  return std::nullopt;
}

/// Distance from point q to segment [a, b].
inline double point_segment_distance(const Vec2& q, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return (q - a).norm();
  double t = (q - a).dot(ab) / len2;
  t = std::min(1.0, std::max(0.0, t));
  return (q - (a + t * ab)).norm();
}

/// Closed-disk test; the boundary counts as inside.
inline bool point_in_disk(const Vec2& q, const Vec2& center, double radius) {
  return (q - center).squaredNorm() <= radius * radius;
}

inline bool segment_intersects_disk(const Vec2& a, const Vec2& b, const Vec2& center,
                                    double radius) {
  return point_segment_distance(center, a, b) <= radius;
}

}  // namespace colag
