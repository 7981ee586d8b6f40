#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "colag/config.hpp"
#include "colag/estimation.hpp"
#include "colag/geometry.hpp"
#include "colag/grid_map.hpp"
#include "colag/mapsync.hpp"
#include "colag/rng.hpp"
#include "colag/scenario.hpp"
#include "colag/sensors.hpp"
#include "colag/trace.hpp"
#include "colag/uav_sched.hpp"
#include "colag/ugv_nav.hpp"

namespace colag {

enum class RunMode { Proposed, Baseline, NoRpe, NoUncertainty, NoScheduling, NoTimeWindow };

inline const char* run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::Proposed: return "proposed";
    case RunMode::Baseline: return "baseline";
    case RunMode::NoRpe: return "no_rpe";
    case RunMode::NoUncertainty: return "no_uncertainty";
    case RunMode::NoScheduling: return "no_scheduling";
    case RunMode::NoTimeWindow: return "no_time_window";
  }
  return "?";
}

inline RunMode run_mode_from_name(const std::string& s) {
  if (s == "proposed") return RunMode::Proposed;
  if (s == "baseline") return RunMode::Baseline;
  if (s == "no_rpe") return RunMode::NoRpe;
  if (s == "no_uncertainty") return RunMode::NoUncertainty;
  if (s == "no_scheduling") return RunMode::NoScheduling;
  if (s == "no_time_window") return RunMode::NoTimeWindow;
  throw std::invalid_argument("unknown run mode: " + s);
}

/// Fixed-step deterministic simulation of one scenario. Per step, in order:
/// (1) true kinematics, (2) collision/goal bookkeeping, (3) sensing and
/// message emission, (4) message delivery, (5) estimation, (6) UGV
/// navigation, (7) UAV scheduling, (8) metrics/trace. All cross-robot
/// information travels as messages delivered one step after emission.
class Engine {
 public:
  struct UgvContext {
    // ground truth
    Pose2 true_pose;
    BodyTwist last_cmd;
    // control tape, anchored at the belief pose it was planned from
    PlannedTrajectory tape;
    std::size_t cursor = 0;
    // estimation
    Belief belief;
    // shared map and cached traversability
    GridMap map;
    InflationField infl_plan;
    InflationField infl_collide;
    InflationField infl_support;  // known-occupied only, at collision inflation
    // navigation state
    bool waiting = false;
    double wait_since = 0.0;          // when the current wait began
    std::optional<Vec2> wait_anchor;  // where the last stop landed
    bool near_goal = false;  // belief within goal tolerance, awaiting confirmation
    bool confirmed = false;
    std::optional<CollisionInfo> current_info;
    std::optional<CollisionInfo> sent_request;
    bool got_rpe = false;
    bool got_patch = false;
    std::vector<Cell> fresh_occupied;  // cells that turned Occupied since last nav pass
    std::optional<RelPoseMeasurement> pending_rpe;
    // metrics (step counts; scaled by dt in the report)
    int reach_step = -1;
    int waiting_steps = 0;
    int goal_wait_steps = 0;
    int overlap_steps = 0;
    int collisions = 0;
    double traj_len = 0.0;
  };

  struct UavContext {
    Vec2 pos{0.0, 0.0};
    Vec2 vel{0.0, 0.0};
    GridMap map;
    std::optional<UavTarget> target;
    double traj_len = 0.0;
  };

  Engine(const Scenario& scenario, const SimConfig& config, RunMode mode,
         TraceWriter* trace = nullptr)
      : sc_(scenario),
        cfg_(config),
        mode_(mode),
        trace_(trace),
        rng_(scenario.seed),
        noise_(NoiseModel::from_params(config.odom_noise(), config.rpe_params())) {
    GridLayout geom;
    geom.resolution = cfg_.resolution;
    geom.origin = Vec2(0.0, 0.0);
    geom.width = static_cast<int>(std::ceil(sc_.extent.x() / cfg_.resolution - 1e-9));
    geom.height = static_cast<int>(std::ceil(sc_.extent.y() / cfg_.resolution - 1e-9));
    geom_ = geom;

    uav_.pos = sc_.uav_start.p;
    uav_.map = GridMap(geom, CellState::Unknown);

    ugvs_.resize(sc_.ugv_starts.size());
    for (std::size_t i = 0; i < ugvs_.size(); ++i) {
      UgvContext& u = ugvs_[i];
      u.true_pose = sc_.ugv_starts[i];
      u.map = GridMap(geom, CellState::Unknown);
      u.infl_plan = InflationField(geom, TraversalView::Planning, cfg_.plan_inflation);
      u.infl_collide = InflationField(geom, TraversalView::Collision, cfg_.inflation);
      u.infl_support = InflationField(geom, TraversalView::Planning, cfg_.inflation);
      u.infl_plan.rebuild(u.map);
      u.infl_collide.rebuild(u.map);
      u.infl_support.rebuild(u.map);
      if (mode_ == RunMode::Baseline) {
        u.belief.mean << u.true_pose.p.x(), u.true_pose.p.y(), u.true_pose.theta;
        u.belief.cov = Mat3::Zero();
        u.belief.stamp = 0.0;
        u.belief.initialized = true;
      }
    }
  }

  // --- accessors for tests and tooling ---
  int step_count() const { return step_; }
  double now() const { return step_ * cfg_.dt; }
  const std::vector<UgvContext>& ugvs() const { return ugvs_; }
  const UavContext& uav() const { return uav_; }
  const GridLayout& geom() const { return geom_; }
  const Scenario& scenario() const { return sc_; }
  const SimConfig& config() const { return cfg_; }
  RunMode mode() const { return mode_; }
  bool finished() const { return done_; }
  const std::string& status() const { return status_; }
  const std::map<int, CollisionInfo>& pending_requests() const { return pending_; }
  const std::optional<Tour>& active_tour() const { return tour_; }
  std::uint64_t state_digest() const { return digest_; }

  /// Canonical serialization of the dynamic state, for determinism checks.
  nlohmann::json serialize_state() const {
    nlohmann::json j;
    j["step"] = step_;
    j["digest"] = digest_;
    nlohmann::json robots = nlohmann::json::array();
    for (const auto& u : ugvs_) {
      nlohmann::json r;
      r["true"] = {u.true_pose.p.x(), u.true_pose.p.y(), u.true_pose.theta};
      r["init"] = u.belief.initialized;
      if (u.belief.initialized) {
        r["mean"] = {u.belief.mean(0), u.belief.mean(1), u.belief.mean(2)};
        nlohmann::json cov = nlohmann::json::array();
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) cov.push_back(u.belief.cov(a, b));
        r["cov"] = cov;
      }
      r["waiting"] = u.waiting;
      r["confirmed"] = u.confirmed;
      robots.push_back(r);
    }
    j["ugvs"] = robots;
    j["uav"] = {uav_.pos.x(), uav_.pos.y(), uav_.vel.x(), uav_.vel.y()};
    return j;
  }

  void step() {
    if (done_) return;
    stage_kinematics();
    stage_world_checks();
    if (!done_) {
      stage_sensing();
      stage_delivery();
      stage_estimation();
      stage_navigation();
      stage_scheduling();
    }
    stage_metrics();
    ++step_;
    check_termination();
  }

  MetricsReport run() {
    const int cap_steps = static_cast<int>(std::lround(cfg_.sim_time_cap / cfg_.dt));
    while (!done_ && step_ < cap_steps) step();
    if (!done_) {
      status_ = "timeout";
      done_ = true;
      if (trace_) trace_->write({{"ev", "timeout"}, {"t", now()}});
    }
    return report();
  }

  MetricsReport report() const {
    MetricsReport r;
    r.sim_time = now();
    r.steps = step_;
    r.status = status_.empty() ? "running" : status_;
    r.uav_traj_len = uav_.traj_len;
    r.served_visits = served_visits_;
    r.requests_issued = requests_issued_;
    r.reschedules = reschedules_;
    r.v_used_max = v_used_max_;
    r.state_digest = digest_;
    for (std::size_t i = 0; i < ugvs_.size(); ++i) {
      const auto& u = ugvs_[i];
      UgvMetrics m;
      m.id = static_cast<int>(i);
      m.reached = u.reach_step >= 0;
      m.reach_time = m.reached ? u.reach_step * cfg_.dt : -1.0;
      m.waiting_time = u.waiting_steps * cfg_.dt;
      m.goal_wait_time = u.goal_wait_steps * cfg_.dt;
      m.traj_len = u.traj_len;
      m.collisions = u.collisions;
      m.overlap_steps = u.overlap_steps;
      r.collisions += u.collisions;
      r.ugvs.push_back(m);
    }
    return r;
  }

  /// Final shared map as a portable graymap (unknown=128, free=255, occ=0).
  void write_map_pgm(const std::string& path) const {
    const GridMap& m = mode_ == RunMode::Baseline && !ugvs_.empty() ? ugvs_[0].map : uav_.map;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_map_pgm: cannot open " + path);
    out << "P5\n" << m.geom.width << " " << m.geom.height << "\n255\n";
    for (int iy = m.geom.height - 1; iy >= 0; --iy)
      for (int ix = 0; ix < m.geom.width; ++ix) {
        const CellState s = m.at(ix, iy);
        const unsigned char v = s == CellState::Occupied ? 0 : (s == CellState::Free ? 255 : 128);
        out.put(static_cast<char>(v));
      }
  }

 private:
  struct RpeMsg {
    RelPoseMeasurement z;
    int deliver_step;
  };
  struct PatchMsg {
    MapPatch patch;
    int to;
    int deliver_step;
  };
  struct RequestMsg {
    int ugv_id;
    std::optional<CollisionInfo> info;  // nullopt = withdraw
    int deliver_step;
  };

  double end_time() const { return (step_ + 1) * cfg_.dt; }

  bool scheduling_active() const { return mode_ != RunMode::Baseline; }

  // (1) true kinematics under the commands chosen last step
  void stage_kinematics() {
    for (std::size_t i = 0; i < ugvs_.size(); ++i) {
      UgvContext& u = ugvs_[i];
      BodyTwist cmd;
      if (!u.waiting && !u.confirmed && u.cursor < u.tape.controls.size())
        cmd = u.tape.controls[u.cursor++];
      u.last_cmd = cmd;
      const Vec3 prev(u.true_pose.p.x(), u.true_pose.p.y(), u.true_pose.theta);
      const Vec3 next = transition(prev, Vec3(cmd.v, 0.0, cmd.omega), cfg_.dt);
      u.traj_len += (next.head<2>() - prev.head<2>()).norm();
      u.true_pose = Pose2{next.head<2>(), next(2)};
    }

    if (scheduling_active()) {
      Vec2 v_des(0.0, 0.0);
      if (uav_.target) {
        const Vec2 d = uav_.target->point - uav_.pos;
        const double dist = d.norm();
        if (dist > 1e-9) {
          const double v_stop = std::sqrt(2.0 * cfg_.uav_a_max * dist);
          v_des = d / dist * std::min(uav_.target->speed, v_stop);
        }
      }
      const Vec2 dv = v_des - uav_.vel;
      const double dv_norm = dv.norm();
      const double max_dv = cfg_.uav_a_max * cfg_.dt;
      uav_.vel = dv_norm <= max_dv ? v_des : Vec2(uav_.vel + dv * (max_dv / dv_norm));
      const Vec2 before = uav_.pos;
      uav_.pos += uav_.vel * cfg_.dt;
      // The observer stays over the mapped arena; a support point pushed past
      // the border must not drag the scan origin off the map.
      const double inset = 0.5 * geom_.resolution;
      const Vec2 lo = geom_.origin + Vec2(inset, inset);
      const Vec2 hi = geom_.origin +
                      Vec2(geom_.width * geom_.resolution - inset,
                           geom_.height * geom_.resolution - inset);
      for (int k = 0; k < 2; ++k) {
        if (uav_.pos(k) < lo(k)) { uav_.pos(k) = lo(k); uav_.vel(k) = 0.0; }
        if (uav_.pos(k) > hi(k)) { uav_.pos(k) = hi(k); uav_.vel(k) = 0.0; }
      }
      uav_.traj_len += (uav_.pos - before).norm();
    }
  }

  // (2) truth-level collision, overlap, and goal confirmation
  void stage_world_checks() {
    for (std::size_t i = 0; i < ugvs_.size(); ++i) {
      UgvContext& u = ugvs_[i];
      if (u.confirmed) continue;
      for (const auto& d : sc_.obstacles) {
        if ((u.true_pose.p - d.center).norm() < d.radius + cfg_.ugv_radius) {
          ++u.collisions;
          status_ = "failed";
          done_ = true;
          if (trace_)
            trace_->write({{"ev", "collide"},
                           {"t", end_time()},
                           {"id", static_cast<int>(i)},
                           {"ox", d.center.x()},
                           {"oy", d.center.y()}});
          break;
        }
      }
    }
    for (std::size_t i = 0; i < ugvs_.size(); ++i)
      for (std::size_t j = i + 1; j < ugvs_.size(); ++j) {
        if (ugvs_[i].confirmed || ugvs_[j].confirmed) continue;
        if ((ugvs_[i].true_pose.p - ugvs_[j].true_pose.p).norm() < 2.0 * cfg_.ugv_radius) {
          ++ugvs_[i].overlap_steps;
          ++ugvs_[j].overlap_steps;
        }
      }
    for (std::size_t i = 0; i < ugvs_.size(); ++i) {
      UgvContext& u = ugvs_[i];
      if (u.confirmed || !u.near_goal) continue;
      if ((u.true_pose.p - sc_.ugv_goals[i]).norm() <= cfg_.goal_tol_true) {
        u.confirmed = true;
        u.reach_step = step_ + 1;
        u.tape = PlannedTrajectory{};
        u.cursor = 0;
        u.waiting = false;
        if (u.sent_request) {
          requests_out_.push_back(
              RequestMsg{static_cast<int>(i), std::nullopt, step_ + cfg_.message_delay_steps});
          u.sent_request.reset();
        }
        if (trace_)
          trace_->write({{"ev", "reach"}, {"t", end_time()}, {"id", static_cast<int>(i)}});
      }
    }
  }

  // (3) sensing + emission
  void stage_sensing() {
    if (step_ % cfg_.sensor_period_steps() != 0) return;
    const double stamp = end_time();

    if (mode_ == RunMode::Baseline) {
      for (std::size_t i = 0; i < ugvs_.size(); ++i) {
        UgvContext& u = ugvs_[i];
        if (u.confirmed) continue;
        const LidarScan scan =
            simulate_lidar(u.true_pose.p, sc_, cfg_.lidar_range, cfg_.lidar_beams, stamp);
        bool changed = false;
        integrate_scan(u.map, scan, [&](const Cell& c, CellState a, CellState b) {
          u.infl_plan.apply_change(c, a, b);
          u.infl_collide.apply_change(c, a, b);
          u.infl_support.apply_change(c, a, b);
          if (b == CellState::Occupied) u.fresh_occupied.push_back(c);
          changed = true;
        });
        if (changed) u.got_patch = true;  // reuse the replan trigger
      }
      return;
    }

    if (!ground_truth_occupied(sc_, uav_.pos)) {
      const LidarScan scan =
          simulate_lidar(uav_.pos, sc_, cfg_.lidar_range, cfg_.lidar_beams, stamp);
      integrate_scan(uav_.map, scan);
    }

    const Pose2 uav_pose{uav_.pos, 0.0};
    for (std::size_t i = 0; i < ugvs_.size(); ++i) {
      UgvContext& u = ugvs_[i];
      auto z = measure_relative_pose(uav_pose, uav_pose, u.true_pose, static_cast<int>(i), sc_,
                                     cfg_.rpe_params(), rng_.stream("rpe/" + std::to_string(i)),
                                     stamp);
      if (!z) continue;
      rpe_out_.push_back(RpeMsg{*z, step_ + cfg_.message_delay_steps});
      MapPatch patch = encode_map_patch(uav_.map, uav_.pos, cfg_.patch_half_extent, stamp);
      patch_out_.push_back(PatchMsg{std::move(patch), static_cast<int>(i),
                                    step_ + cfg_.message_delay_steps});
      // A support visit completes when both artifacts are emitted to the tour
      // head from the support point itself. Range alone is not a visit: the
      // map patch reaches shorter than the pose link, and the whole point of
      // the detour is to put the patch over the blocked ground.
      if (tour_ && uav_.target && uav_.target->ugv_id == static_cast<int>(i) &&
          (uav_.pos - uav_.target->point).norm() <= cfg_.serve_radius) {
        served_[uav_.target->node] = true;
        serve_event_ = true;
        ++served_visits_;
        last_served_[static_cast<int>(i)] = stamp;
        pending_.erase(static_cast<int>(i));
        if (trace_)
          trace_->write({{"ev", "serve"},
                         {"t", stamp},
                         {"node", uav_.target->node},
                         {"id", static_cast<int>(i)}});
      }
    }
  }

  // (4) delivery of last step's messages
  void stage_delivery() {
    while (!patch_out_.empty() && patch_out_.front().deliver_step <= step_) {
      PatchMsg msg = std::move(patch_out_.front());
      patch_out_.pop_front();
      UgvContext& u = ugvs_[msg.to];
      merge_map_patch(u.map, msg.patch, [&](const Cell& c, CellState a, CellState b) {
        u.infl_plan.apply_change(c, a, b);
        u.infl_collide.apply_change(c, a, b);
        u.infl_support.apply_change(c, a, b);
        if (b == CellState::Occupied) u.fresh_occupied.push_back(c);
      });
      u.got_patch = true;
      if (trace_)
        trace_->write({{"ev", "patch"},
                       {"t", end_time()},
                       {"id", msg.to},
                       {"occ", msg.patch.occupied.size()},
                       {"unk", msg.patch.unknown.size()}});
    }
    while (!rpe_out_.empty() && rpe_out_.front().deliver_step <= step_) {
      RpeMsg msg = std::move(rpe_out_.front());
      rpe_out_.pop_front();
      UgvContext& u = ugvs_[msg.z.ugv_id];
      u.pending_rpe = msg.z;
      u.got_rpe = true;
    }
  }

  // (5) EKF update with delivered fixes, then predict over this step's motion
  void stage_estimation() {
    if (mode_ == RunMode::Baseline) {
      for (auto& u : ugvs_) {
        u.belief.mean << u.true_pose.p.x(), u.true_pose.p.y(), u.true_pose.theta;
        u.belief.cov = Mat3::Zero();
        u.belief.stamp = end_time();
      }
      return;
    }
    for (std::size_t i = 0; i < ugvs_.size(); ++i) {
      UgvContext& u = ugvs_[i];
      if (u.pending_rpe) {
        const RelPoseMeasurement z = *u.pending_rpe;
        u.pending_rpe.reset();
        if (!u.belief.initialized) {
          u.belief = initialize_belief(z, noise_.meas_cov);
        } else if (mode_ != RunMode::NoRpe && z.stamp >= u.belief.stamp - 1e-9) {
          u.belief = ekf_update(u.belief, z);
        }
      }
      if (u.belief.initialized) {
        const WheelOdomSample odom = sample_wheel_odometry(
            u.last_cmd.v, 0.0, u.last_cmd.omega, cfg_.odom_noise(),
            rng_.stream("odom/" + std::to_string(i)), end_time());
        u.belief = ekf_predict(u.belief, odom, cfg_.dt, noise_);
      }
    }
  }

  // (6) replan + collision prediction + stop/wait + request upkeep
  void stage_navigation() {
    const double t = end_time();
    for (std::size_t i = 0; i < ugvs_.size(); ++i) {
      UgvContext& u = ugvs_[i];
      if (u.confirmed || !u.belief.initialized) continue;
      const bool due = step_ % cfg_.nav_period_steps() == 0 || u.got_rpe || u.got_patch;
      u.got_rpe = false;
      u.got_patch = false;
      if (!due) continue;

      u.near_goal = (u.belief.position() - sc_.ugv_goals[i]).norm() <= cfg_.goal_tol_belief;
      if (u.near_goal) {
        // Parked at the believed goal until truth confirms; keep a standing
        // request so the observer comes to settle the estimate.
        u.tape = PlannedTrajectory{};
        u.cursor = 0;
        u.waiting = false;
        CollisionInfo info;
        info.ugv_id = static_cast<int>(i);
        info.p_ps = u.belief.position();
        info.p_pc = u.belief.position();
        info.t_pc = t + cfg_.standing_deadline;
        info.issued_at = t;
        u.current_info = info;
        upsert_request(i, info);
        continue;
      }

      // The tape persists across nav passes; every rebuild restarts the speed
      // ramp from rest, so rebuild only when the current tape is unusable,
      // stale, or invalidated by the map or the estimate.
      const bool tape_live = u.tape.moving() && u.cursor < u.tape.controls.size();
      bool deviated = false;
      if (tape_live) {
        const std::size_t ref = std::min(u.cursor, u.tape.points.size() - 1);
        deviated =
            (u.belief.position() - u.tape.points[ref].pos).norm() > cfg_.replan_deviation;
      }
      const bool threatened = tape_live && tape_threatened(u);
      const bool periodic = step_ % cfg_.replan_period_steps() == 0;
      if (u.waiting || !tape_live || deviated || threatened || periodic) replan(i);
      u.fresh_occupied.clear();
      predict(i, t);

      const bool was_waiting = u.waiting;
      if (!u.waiting) {
        u.waiting = wait_guard(t, u.current_info, cfg_.wait_threshold) == MotionMode::StopAndWait;
      } else {
        // Hysteresis: a stopped robot resumes only when the fresh prediction
        // is clear of trouble well beyond the stop threshold.
        u.waiting = u.current_info &&
                    u.current_info->t_pc - t < cfg_.wait_release_threshold;
      }
      if (u.waiting && !was_waiting) {
        u.tape = PlannedTrajectory{};
        u.cursor = 0;
        u.wait_since = t;
        u.wait_anchor = u.belief.position();
      }
      if (u.waiting != was_waiting && trace_)
        trace_->write(
            {{"ev", "wait"}, {"t", t}, {"id", static_cast<int>(i)}, {"on", u.waiting}});

      if (u.current_info) {
        CollisionInfo req = *u.current_info;
        // A stopped robot is in no danger; its request is a claim for
        // service, not a deadline it can miss. Its natural hit time sits a
        // fraction of a second past its nose and rolls with the clock, which
        // reads to the scheduler as a window nobody could ever save, and it
        // expires out of the request set between refreshes. The aging guard
        // keeps the relaxed window from starving the robot behind drivers.
        if (u.waiting) req.t_pc = t + cfg_.standing_deadline;
        upsert_request(i, req);
      } else {
        withdraw_request(i);
      }
    }
  }

  /// True when a newly occupied cell encroaches on the untraveled tape tail.
  bool tape_threatened(const UgvContext& u) const {
    if (u.fresh_occupied.empty()) return false;
    const double margin = cfg_.plan_inflation + 0.5 * geom_.resolution;
    for (std::size_t j = u.cursor; j < u.tape.points.size(); j += 8) {
      const Vec2& p = u.tape.points[j].pos;
      for (const Cell& c : u.fresh_occupied)
        if ((geom_.cell_center(c) - p).norm() < margin) return true;
    }
    return false;
  }

  void replan(std::size_t i) {
    UgvContext& u = ugvs_[i];
    auto blocked_plan = [&](const Cell& c) { return u.infl_plan.blocked(c); };

    Vec2 start_pos = u.belief.position();
    start_pos.x() = std::clamp(start_pos.x(), geom_.origin.x() + 0.5 * geom_.resolution,
                               geom_.origin.x() + geom_.width * geom_.resolution -
                                   0.5 * geom_.resolution);
    start_pos.y() = std::clamp(start_pos.y(), geom_.origin.y() + 0.5 * geom_.resolution,
                               geom_.origin.y() + geom_.height * geom_.resolution -
                                   0.5 * geom_.resolution);
    const Cell start_raw = *geom_.world_to_grid(start_pos);
    const auto goal_raw = geom_.world_to_grid(sc_.ugv_goals[i]);

    const auto start = nearest_traversable_cell(geom_, blocked_plan, start_raw, 12);
    const auto goal = goal_raw ? nearest_traversable_cell(geom_, blocked_plan, *goal_raw, 6)
                               : std::nullopt;
    u.tape = PlannedTrajectory{};
    u.cursor = 0;
    if (!start || !goal) return;

    const PlanResult plan = planner_.plan(geom_, blocked_plan, *start, *goal);
    if (!plan.found()) return;

    std::vector<Vec2> polyline = shortcut_path(geom_, blocked_plan, plan.cells);
    if (polyline.empty()) return;
    // Anchor the tape at the estimate. When planning had to start from an
    // escape cell away from the robot, keep that cell as a via point; cutting
    // it off would stitch a first leg straight through whatever the escape
    // was routing around.
    if (start_raw == *start)
      polyline.front() = u.belief.position();
    else
      polyline.insert(polyline.begin(), u.belief.position());
    u.tape = profile_trajectory(polyline, u.belief.heading(), cfg_.motion_limits(), cfg_.dt);
    u.cursor = 0;
    if (trace_)
      trace_->write({{"ev", "plan"},
                     {"t", end_time()},
                     {"id", static_cast<int>(i)},
                     {"len", u.tape.total_length},
                     {"cells", plan.cells.size()}});
  }

  void predict(std::size_t i, double t) {
    UgvContext& u = ugvs_[i];
    if (!u.tape.moving()) {
      // No executable plan: treat the robot as blocked in place.
      CollisionInfo info;
      info.ugv_id = static_cast<int>(i);
      info.p_ps = u.belief.position();
      info.p_pc = u.belief.position();
      info.t_pc = t + cfg_.standing_deadline;
      info.issued_at = t;
      u.current_info = info;
      return;
    }
    std::vector<Belief> rollout =
        propagate_uncertainty(u.belief, u.tape, cfg_.predict_horizon, noise_,
                              cfg_.predict_interval, u.cursor);
    // The leading sample is the robot's current state. Standing inside the
    // uncertainty band must not forbid driving out of it, so prediction only
    // considers future samples.
    rollout.erase(rollout.begin());
    // A stop can land on the lip of an inflation ring; the spot the robot
    // already occupies is evidence, not a future collision. While it is still
    // inside a small bubble around the stop, the plan prefix inside that
    // bubble goes unjudged so escape tapes can be evaluated on their merits.
    if (u.wait_anchor) {
      if ((u.belief.position() - *u.wait_anchor).norm() >= cfg_.self_clearance) {
        u.wait_anchor.reset();
      } else {
        auto it = rollout.begin();
        while (it != rollout.end() &&
               (it->position() - *u.wait_anchor).norm() < cfg_.self_clearance)
          ++it;
        rollout.erase(rollout.begin(), it);
      }
    }
    if (mode_ == RunMode::NoUncertainty)
      for (auto& b : rollout) b.cov.setZero();
    // Support points only need to avoid known walls; the observer is aerial
    // and unexplored ground is exactly where it is needed.
    u.current_info = predict_collision(
        rollout, geom_, [&](const Cell& c) { return u.infl_collide.blocked(c); },
        [&](const Cell& c) { return u.infl_support.blocked(c); }, cfg_.predict_params(),
        static_cast<int>(i), t, u.belief.position());
  }

  void upsert_request(std::size_t i, const CollisionInfo& info) {
    UgvContext& u = ugvs_[i];
    const bool changed = !u.sent_request || u.sent_request->t_pc != info.t_pc ||
                         u.sent_request->p_ps != info.p_ps;
    if (!changed) return;
    if (!u.sent_request) ++requests_issued_;
    u.sent_request = info;
    requests_out_.push_back(RequestMsg{static_cast<int>(i), info,
                                       step_ + cfg_.message_delay_steps});
    if (trace_)
      trace_->write({{"ev", "request"},
                     {"t", info.issued_at},
                     {"id", static_cast<int>(i)},
                     {"px", info.p_ps.x()},
                     {"py", info.p_ps.y()},
                     {"tpc", info.t_pc}});
  }

  void withdraw_request(std::size_t i) {
    UgvContext& u = ugvs_[i];
    if (!u.sent_request) return;
    u.sent_request.reset();
    requests_out_.push_back(
        RequestMsg{static_cast<int>(i), std::nullopt, step_ + cfg_.message_delay_steps});
    if (trace_)
      trace_->write({{"ev", "withdraw"}, {"t", end_time()}, {"id", static_cast<int>(i)}});
  }

  // (7) scheduler: ingest request messages, react to events, retarget
  void stage_scheduling() {
    if (!scheduling_active()) return;
    const double t = end_time();
    bool material = false;  // a tracked request moved enough to matter

    while (!requests_out_.empty() && requests_out_.front().deliver_step <= step_) {
      RequestMsg msg = std::move(requests_out_.front());
      requests_out_.pop_front();
      if (msg.info) {
        auto it = pending_.find(msg.ugv_id);
        if (it != pending_.end() && ((it->second.p_ps - msg.info->p_ps).norm() > 1.0 ||
                                     std::abs(it->second.t_pc - msg.info->t_pc) > 1.0))
          material = true;
        pending_[msg.ugv_id] = *msg.info;
      } else {
        pending_.erase(msg.ugv_id);
      }
    }

    // Synthetic standing requests bring the observer to robots it has never
    // seen; they refresh silently and vanish on initialization.
    for (std::size_t i = 0; i < ugvs_.size(); ++i) {
      UgvContext& u = ugvs_[i];
      const int id = static_cast<int>(i);
      if (!u.belief.initialized && !u.confirmed) {
        CollisionInfo boot;
        boot.ugv_id = id;
        boot.p_ps = sc_.ugv_starts[i].p;
        boot.p_pc = boot.p_ps;
        boot.t_pc = t + cfg_.standing_deadline;
        boot.issued_at = t;
        pending_[id] = boot;
        bootstrap_active_.insert(id);
      } else if (bootstrap_active_.count(id)) {
        pending_.erase(id);
        bootstrap_active_.erase(id);
      }
    }

    // Requests whose window already closed: drop; owners will refresh.
    for (auto it = pending_.begin(); it != pending_.end();) {
      if (it->second.t_pc <= t + 1e-9)
        it = pending_.erase(it);
      else
        ++it;
    }

    // Resolve on changes to the serviceable set, not on every refresh.
    std::set<int> visible;
    for (const auto& [id, info] : pending_)
      if (!deferred(id, t)) visible.insert(id);
    const bool set_changed = visible != last_visible_;
    last_visible_ = std::move(visible);

    const bool floor_due = step_ - last_resolve_step_ >= cfg_.reschedule_floor_steps();
    if (!(set_changed || material || serve_event_ || floor_due)) return;
    serve_event_ = false;
    last_resolve_step_ = step_;
    resolve(t);
  }

  /// A just-served robot's requests sit out a short refractory so the serve /
  /// re-request cycle cannot pin the vehicle to its nearest claimant while
  /// others starve. Emissions continue regardless while the robot is in range.
  bool deferred(int ugv_id, double t) const {
    auto it = last_served_.find(ugv_id);
    return it != last_served_.end() && t - it->second < cfg_.serve_refractory;
  }

  void resolve(double t) {
    ++reschedules_;
    if (pending_.empty()) {
      tour_.reset();
      uav_.target.reset();
      if (cfg_.idle_follow_centroid) {
        Vec2 c(0.0, 0.0);
        int n = 0;
        for (std::size_t i = 0; i < ugvs_.size(); ++i)
          if (!ugvs_[i].confirmed && ugvs_[i].belief.initialized) {
            c += ugvs_[i].belief.position();
            ++n;
          }
        if (n > 0)
          uav_.target = UavTarget{Vec2(c / static_cast<double>(n)), cfg_.uav_v_max, -1, -1};
      }
      return;
    }

    std::vector<CollisionInfo> requests;
    requests.reserve(pending_.size());
    for (const auto& [id, info] : pending_)
      if (!deferred(id, t)) requests.push_back(info);
    if (requests.empty()) {
      // Every claimant was served moments ago. Hold position on the most
      // urgent one so emissions keep flowing while its refractory runs out.
      tour_.reset();
      const CollisionInfo* best = nullptr;
      for (const auto& [id, info] : pending_)
        if (!best || info.t_pc < best->t_pc - 1e-12) best = &info;
      uav_.target = UavTarget{best->p_ps, cfg_.uav_v_max, -1, -1};
      return;
    }

    if (mode_ == RunMode::NoScheduling) {
      // Greedy: chase the most urgent deadline at base speed.
      const CollisionInfo* best = &requests.front();
      for (const auto& r : requests)
        if (r.t_pc < best->t_pc - 1e-12) best = &r;
      tour_ = Tour{};
      tour_->order = {1};
      tour_->v_used = cfg_.uav_v_max;
      tour_->feasible = true;
      meta_.assign(2, NodeMeta{});
      meta_[1] = NodeMeta{best->ugv_id, best->p_ps};
      served_.assign(2, false);
      uav_.target = UavTarget{best->p_ps, cfg_.uav_v_max, 1, best->ugv_id};
      trace_tour(t);
      return;
    }

    EscalationLadder ladder{cfg_.escalation_factor, cfg_.escalation_cap};
    ScheduleResult res;
    if (mode_ == RunMode::NoTimeWindow) {
      VrptwInstance inst =
          build_vrptw(uav_.pos, uav_.vel, requests, t, cfg_.uav_v_max, cfg_.uav_a_max);
      for (auto& w : inst.windows) w.second = std::numeric_limits<double>::infinity();
      auto tour = solve_vrptw(inst, cfg_.exact_solver_max_n);
      res.tour = *tour;  // always feasible without windows
      res.tour.v_used = cfg_.uav_v_max;
      res.v_used = cfg_.uav_v_max;
      res.instance = std::move(inst);
    } else {
      // Aging guard: a stopped robot cannot save its own window (the predicted
      // hit sits a fraction of a second past its nose and rolls forward with
      // the clock), so violation-minimizing tours sacrifice it to whoever is
      // still driving, indefinitely. Past a patience bound the longest-waiting
      // claimant takes the head outright.
      int aged = -1;
      double aged_since = std::numeric_limits<double>::infinity();
      for (const auto& r : requests) {
        const UgvContext& u = ugvs_[r.ugv_id];
        if (u.waiting && t - u.wait_since >= cfg_.wait_priority_after &&
            u.wait_since < aged_since) {
          aged = r.ugv_id;
          aged_since = u.wait_since;
        }
      }
      if (aged >= 0) {
        res = schedule_headlocked(uav_.pos, uav_.vel, requests, t, aged, cfg_.uav_v_max,
                                  cfg_.uav_a_max, ladder, cfg_.exact_solver_max_n);
      } else {
        res = schedule(uav_.pos, uav_.vel, requests, t, cfg_.uav_v_max, cfg_.uav_a_max, ladder,
                       cfg_.exact_solver_max_n);
        // Dispatch hysteresis: the visit already in flight stays at the head
        // of the tour unless demoting it saves a whole window or beats it by a
        // real lateness margin. Without this, near-tied re-solves alternate
        // heads and the vehicle turns around every second without arriving
        // anywhere.
        const int committed = uav_.target ? uav_.target->ugv_id : -1;
        const bool head_pending =
            committed >= 0 && std::any_of(requests.begin(), requests.end(), [&](const auto& r) {
              return r.ugv_id == committed;
            });
        if (head_pending && !res.tour.order.empty() &&
            res.instance.node_meta[res.tour.order.front()].ugv_id != committed) {
          ScheduleResult held =
              schedule_headlocked(uav_.pos, uav_.vel, requests, t, committed, cfg_.uav_v_max,
                                  cfg_.uav_a_max, ladder, cfg_.exact_solver_max_n);
          const bool demote =
              res.tour.violation_count < held.tour.violation_count ||
              (res.tour.violation_count == held.tour.violation_count &&
               res.tour.violation_sum + cfg_.commit_margin < held.tour.violation_sum);
          if (!demote) res = std::move(held);
        }
      }
    }
    tour_ = res.tour;
    meta_ = res.instance.node_meta;
    served_.assign(meta_.size(), false);
    v_used_max_ = std::max(v_used_max_, res.v_used);
    if (trace_ && res.v_used > cfg_.uav_v_max + 1e-12)
      trace_->write({{"ev", "escalate"}, {"t", t}, {"v", res.v_used}});
    auto target = current_waypoint(*tour_, meta_, served_);
    uav_.target = target;
    trace_tour(t);
  }

  void trace_tour(double t) {
    if (!trace_ || !tour_) return;
    nlohmann::json j;
    j["ev"] = "tour";
    j["t"] = t;
    j["order"] = tour_->order;
    j["arrival"] = tour_->arrival;
    j["v"] = tour_->v_used;
    j["feasible"] = tour_->feasible;
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t k = 1; k < meta_.size(); ++k)
      nodes.push_back({{"ugv", meta_[k].ugv_id},
                       {"x", meta_[k].p_ps.x()},
                       {"y", meta_[k].p_ps.y()}});
    j["nodes"] = nodes;
    trace_->write(j);
  }

  // (8) metric accumulation, trace sampling, digest
  void stage_metrics() {
    for (std::size_t i = 0; i < ugvs_.size(); ++i) {
      UgvContext& u = ugvs_[i];
      if (u.confirmed) continue;
      if (u.near_goal)
        ++u.goal_wait_steps;
      else if (u.waiting && u.belief.initialized)
        ++u.waiting_steps;
      digest_ = digest_mix(digest_, u.true_pose.p.x());
      digest_ = digest_mix(digest_, u.true_pose.p.y());
      digest_ = digest_mix(digest_, u.true_pose.theta);
    }
    digest_ = digest_mix(digest_, uav_.pos.x());
    digest_ = digest_mix(digest_, uav_.pos.y());

    if (trace_ && cfg_.trace_pose_stride > 0 && step_ % cfg_.trace_pose_stride == 0) {
      for (std::size_t i = 0; i < ugvs_.size(); ++i) {
        const UgvContext& u = ugvs_[i];
        nlohmann::json j{{"ev", "pose"},
                         {"t", end_time()},
                         {"id", static_cast<int>(i)},
                         {"x", u.true_pose.p.x()},
                         {"y", u.true_pose.p.y()},
                         {"th", u.true_pose.theta}};
        if (u.belief.initialized) {
          j["bx"] = u.belief.mean(0);
          j["by"] = u.belief.mean(1);
          j["bth"] = u.belief.mean(2);
          j["ptr"] = u.belief.cov.trace();
        }
        trace_->write(j);
      }
      if (scheduling_active())
        trace_->write({{"ev", "uav"},
                       {"t", end_time()},
                       {"x", uav_.pos.x()},
                       {"y", uav_.pos.y()}});
    }
  }

  void check_termination() {
    if (done_) return;
    bool all = true;
    for (const auto& u : ugvs_)
      if (!u.confirmed) {
        all = false;
        break;
      }
    if (all) {
      status_ = "complete";
      done_ = true;
      if (trace_) trace_->write({{"ev", "run"}, {"t", now()}, {"status", status_}});
    }
  }

  static std::uint64_t digest_mix(std::uint64_t h, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    h ^= bits;
    h *= 0x100000001b3ull;
    return h;
  }

  Scenario sc_;
  SimConfig cfg_;
  RunMode mode_;
  TraceWriter* trace_;
  RngRegistry rng_;
  NoiseModel noise_;
  GridLayout geom_;

  std::vector<UgvContext> ugvs_;
  UavContext uav_;
  PathPlanner planner_;

  std::deque<RpeMsg> rpe_out_;
  std::deque<PatchMsg> patch_out_;
  std::deque<RequestMsg> requests_out_;

  std::map<int, CollisionInfo> pending_;
  std::map<int, double> last_served_;
  std::set<int> bootstrap_active_;
  std::set<int> last_visible_;
  std::optional<Tour> tour_;
  std::vector<NodeMeta> meta_;
  std::vector<bool> served_;
  bool serve_event_ = false;
  int last_resolve_step_ = -1000000;

  int step_ = 0;
  bool done_ = false;
  std::string status_;
  std::uint64_t digest_ = 0xcbf29ce484222325ull;

  int served_visits_ = 0;
  int requests_issued_ = 0;
  int reschedules_ = 0;
  double v_used_max_ = 0.0;
};

}  // namespace colag
