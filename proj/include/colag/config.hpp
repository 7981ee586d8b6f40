#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "colag/geometry.hpp"
#include "colag/scenario.hpp"
#include "colag/sensors.hpp"
#include "colag/ugv_nav.hpp"

namespace colag {

/// Every tunable in one place. Values mirror the benchmark hardware setup;
/// the JSON loader overrides only the keys present in the file.
struct SimConfig {
  // world
  Vec2 extent{27.0, 27.0};
  double resolution = 0.1;
  int obstacle_count = 40;           // sparse; dense uses 80
  double obstacle_radius_min = 0.3;
  double obstacle_radius_max = 0.8;
  double ugv_radius = 0.3;
  double spawn_clearance = 0.6;
  double spawn_spacing = 1.2;
  double group_spread = 4.0;
  double corridor_clearance = 1.0;
  int placement_retry_budget = 1000;
  int scenario_attempt_budget = 10000;

  // sensing
  double lidar_range = 8.0;
  int lidar_beams = 360;
  double sensor_rate_hz = 10.0;      // lidar + RPE + patch cadence
  double rpe_range = 5.0;
  double rpe_sigma_pos = 0.2;
  double rpe_sigma_theta = 0.05;
  double rpe_fov_half_angle = -1.0;  // disabled by default
  double odom_sigma_vx = 0.0336;
  double odom_sigma_vy = 0.005;
  double odom_sigma_omega = 0.0292;
  double patch_half_extent = 2.5;

  // ugv navigation
  double ugv_v_max = 0.5;
  double ugv_a_max = 1.0;
  double ugv_omega_max = 2.0;
  double rotate_threshold_deg = 30.0;
  double inflation = 0.38;           // robot radius + half a cell diagonal (collision view)
  double plan_inflation = 0.60;      // extra margin so routes absorb fresh-fix uncertainty
  double predict_horizon = 8.0;
  double predict_interval = 0.2;
  double support_setback = 0.75;
  double self_clearance = 0.2;       // rollout blind spot around the standing position
  double max_ellipse_axis = 3.0;
  double wait_threshold = 0.4;       // t_c
  double wait_release_threshold = 2.0;  // resume margin for a stopped robot
  double standing_deadline = 10.0;   // request horizon for parked/unseen robots
  double nav_rate_hz = 2.0;          // collision-predict floor
  double replan_period = 5.0;        // tape refresh cadence while driving
  double replan_deviation = 0.35;    // belief-to-tape offset that forces a replan
  double goal_tol_belief = 0.3;
  double goal_tol_true = 0.5;

  // uav scheduling
  double uav_v_max = 3.0;
  double uav_a_max = 1.0;
  double escalation_factor = 1.25;
  double escalation_cap = 4.0;
  int exact_solver_max_n = 12;
  double reschedule_floor_hz = 1.0;
  double serve_radius = 0.3;         // arrival tolerance at the support point
  double serve_refractory = 0.8;     // a just-served robot's requests wait this long
  double commit_margin = 2.0;        // lateness a head swap must save, seconds
  double wait_priority_after = 5.0;  // waiting this long wins the tour head outright
  bool idle_follow_centroid = true;

  // engine
  double dt = 0.05;
  double sim_time_cap = 600.0;
  int message_delay_steps = 1;       // emission to delivery, in steps
  int trace_pose_stride = 10;        // pose rows every N steps; 0 disables

  OdomNoise odom_noise() const { return OdomNoise{odom_sigma_vx, odom_sigma_vy, odom_sigma_omega}; }
  RpeParams rpe_params() const {
    return RpeParams{rpe_range, rpe_sigma_pos, rpe_sigma_theta, rpe_fov_half_angle};
  }
  MotionLimits motion_limits() const {
    return MotionLimits{ugv_v_max, ugv_a_max, ugv_omega_max, rotate_threshold_deg * kPi / 180.0};
  }
  PredictParams predict_params() const { return PredictParams{support_setback, max_ellipse_axis}; }
  ScenarioParams scenario_params(int ugv_count) const {
    ScenarioParams p;
    p.obstacle_count = obstacle_count;
    p.ugv_count = ugv_count;
    p.obstacle_radius_min = obstacle_radius_min;
    p.obstacle_radius_max = obstacle_radius_max;
    p.spawn_clearance = spawn_clearance;
    p.spawn_spacing = spawn_spacing;
    p.group_spread = group_spread;
    p.corridor_clearance = corridor_clearance;
    p.placement_retry_budget = placement_retry_budget;
    p.attempt_budget = scenario_attempt_budget;
    p.validation_resolution = resolution;
    return p;
  }
  int sensor_period_steps() const {
    return std::max(1, static_cast<int>(std::lround(1.0 / (sensor_rate_hz * dt))));
  }
  int nav_period_steps() const {
    return std::max(1, static_cast<int>(std::lround(1.0 / (nav_rate_hz * dt))));
  }
  int replan_period_steps() const {
    return std::max(1, static_cast<int>(std::lround(replan_period / dt)));
  }
  int reschedule_floor_steps() const {
    return std::max(1, static_cast<int>(std::lround(1.0 / (reschedule_floor_hz * dt))));
  }
};

#define COLAG_CFG_FIELDS(X)                                                                   \
  X(resolution) X(obstacle_count) X(obstacle_radius_min) X(obstacle_radius_max)               \
  X(ugv_radius) X(spawn_clearance) X(spawn_spacing) X(group_spread) X(corridor_clearance)     \
  X(placement_retry_budget) X(scenario_attempt_budget) X(lidar_range) X(lidar_beams)          \
  X(sensor_rate_hz) X(rpe_range) X(rpe_sigma_pos) X(rpe_sigma_theta) X(rpe_fov_half_angle)    \
  X(odom_sigma_vx) X(odom_sigma_vy) X(odom_sigma_omega) X(patch_half_extent) X(ugv_v_max)     \
  X(ugv_a_max) X(ugv_omega_max) X(rotate_threshold_deg) X(inflation) X(plan_inflation)        \
  X(predict_horizon)                                                                          \
  X(predict_interval) X(support_setback) X(self_clearance) X(max_ellipse_axis) X(wait_threshold)                \
  X(wait_release_threshold) X(standing_deadline) X(nav_rate_hz) X(replan_period)              \
  X(replan_deviation) X(goal_tol_belief)                                                      \
  X(goal_tol_true) X(uav_v_max) X(uav_a_max)                                                  \
  X(escalation_factor) X(escalation_cap) X(exact_solver_max_n) X(reschedule_floor_hz)         \
  X(serve_radius) X(serve_refractory) X(commit_margin) X(wait_priority_after)                 \
  X(idle_follow_centroid) X(dt) X(sim_time_cap)                                               \
  X(message_delay_steps) X(trace_pose_stride)

inline void to_json(nlohmann::json& j, const SimConfig& c) {
  j = nlohmann::json::object();
  j["extent"] = {c.extent.x(), c.extent.y()};
#define COLAG_CFG_WRITE(f) j[#f] = c.f;
  COLAG_CFG_FIELDS(COLAG_CFG_WRITE)
#undef COLAG_CFG_WRITE
}

inline void from_json(const nlohmann::json& j, SimConfig& c) {
  if (j.contains("extent"))
    c.extent = Vec2(j["extent"].at(0).get<double>(), j["extent"].at(1).get<double>());
#define COLAG_CFG_READ(f) \
  if (j.contains(#f)) j.at(#f).get_to(c.f);
  COLAG_CFG_FIELDS(COLAG_CFG_READ)
#undef COLAG_CFG_READ
}

#undef COLAG_CFG_FIELDS

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j.get<SimConfig>();
}

inline void save_config(const SimConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_config: cannot open " + path);
  out << nlohmann::json(c).dump(2) << "\n";
}

}  // namespace colag
