#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

#include "colag/estimation.hpp"
#include "colag/geometry.hpp"
#include "colag/grid_map.hpp"
#include "colag/mapsync.hpp"

namespace colag {

// --- Grid path planning ------------------------------------------------------

enum class PlanStatus { Found, Unreachable, StartBlocked };

struct PlanResult {
  PlanStatus status = PlanStatus::Unreachable;
  std::vector<Cell> cells;
  double cost = 0.0;
  bool found() const { return status == PlanStatus::Found; }
};

/// A* over an 8-connected grid with Euclidean edge costs and octile
/// heuristic. Diagonal moves additionally require both adjacent orthogonal
/// cells to be free, so a path never slips between two blocked corners.
/// Ties on f-score break toward the lower flat cell index. Buffers are
/// reused across calls via epoch stamping.
class PathPlanner {
 public:
  template <class BlockedFn>
  PlanResult plan(const GridLayout& geom, BlockedFn&& blocked, const Cell& start,
                  const Cell& goal) {
    if (!geom.in_bounds(start) || !geom.in_bounds(goal))
      throw std::invalid_argument("plan: endpoint out of bounds");

    PlanResult result;
    if (blocked(start)) {
      result.status = PlanStatus::StartBlocked;
      return result;
    }
    if (blocked(goal)) return result;  // unreachable

    ensure_capacity(geom.cell_count());
    ++epoch_;
    const double res = geom.resolution;
    const double diag = res * std::sqrt(2.0);

    auto heuristic = [&](const Cell& c) {
      const double dx = std::abs(c.x - goal.x) * res;
      const double dy = std::abs(c.y - goal.y) * res;
      return std::max(dx, dy) + (std::sqrt(2.0) - 1.0) * std::min(dx, dy);
    };

    struct Entry {
      double f;
      double g;
      std::uint32_t idx;
      bool operator>(const Entry& o) const {
        if (f != o.f) return f > o.f;
        return idx > o.idx;
      }
    };
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;

    const std::uint32_t start_idx = static_cast<std::uint32_t>(geom.flat(start));
    const std::uint32_t goal_idx = static_cast<std::uint32_t>(geom.flat(goal));
    set_g(start_idx, 0.0);
    parent_[start_idx] = start_idx;
    open.push(Entry{heuristic(start), 0.0, start_idx});

    static const int dx8[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    static const int dy8[8] = {0, 0, 1, -1, 1, -1, 1, -1};

    while (!open.empty()) {
      const Entry e = open.top();
      open.pop();
      if (e.g > g_at(e.idx) + 1e-12) continue;  // stale heap entry
      if (e.idx == goal_idx) break;

      const int cx = static_cast<int>(e.idx % geom.width);
      const int cy = static_cast<int>(e.idx / geom.width);
      for (int k = 0; k < 8; ++k) {
        const int nx = cx + dx8[k], ny = cy + dy8[k];
        if (!geom.in_bounds(nx, ny)) continue;
        const Cell nc{nx, ny};
        if (blocked(nc)) continue;
        const bool diagonal = k >= 4;
        if (diagonal &&
            (blocked(Cell{cx + dx8[k], cy}) || blocked(Cell{cx, cy + dy8[k]})))
          continue;
        const double ng = e.g + (diagonal ? diag : res);
        const std::uint32_t nidx = static_cast<std::uint32_t>(geom.flat(nc));
        if (ng < g_at(nidx) - 1e-12) {
          set_g(nidx, ng);
          parent_[nidx] = e.idx;
          open.push(Entry{ng + heuristic(nc), ng, nidx});
        }
      }
    }

    if (g_at(goal_idx) == std::numeric_limits<double>::infinity()) return result;

    result.status = PlanStatus::Found;
    result.cost = g_at(goal_idx);
    std::uint32_t at = goal_idx;
    while (true) {
      result.cells.push_back(Cell{static_cast<int>(at % geom.width),
                                  static_cast<int>(at / geom.width)});
      if (at == start_idx) break;
      at = parent_[at];
    }
    std::reverse(result.cells.begin(), result.cells.end());
    return result;
  }

 private:
  void ensure_capacity(std::size_t n) {
    if (g_.size() < n) {
      g_.resize(n, 0.0);
      stamp_.resize(n, 0);
      parent_.resize(n, 0);
    }
  }
  double g_at(std::uint32_t i) const {
    return stamp_[i] == epoch_ ? g_[i] : std::numeric_limits<double>::infinity();
  }
  void set_g(std::uint32_t i, double v) {
    g_[i] = v;
    stamp_[i] = epoch_;
  }

  std::vector<double> g_;
  std::vector<std::uint32_t> stamp_;
  std::vector<std::uint32_t> parent_;
  std::uint32_t epoch_ = 0;
};

/// Spec-shaped entry point: plan between world points on a map view.
inline PlanResult plan_path(const GridMap& map, const Vec2& start, const Vec2& goal,
                            double inflation, TraversalView view = TraversalView::Planning) {
  const auto s = map.geom.world_to_grid(start);
  const auto g = map.geom.world_to_grid(goal);
  if (!s || !g) throw std::invalid_argument("plan_path: endpoint off the map");
  PathPlanner planner;
  return planner.plan(map.geom,
                      [&](const Cell& c) { return !is_traversable(map, c, view, inflation); },
                      *s, *g);
}

/// Closest unblocked cell within `max_ring` Chebyshev rings of `c`, ties
/// broken by (euclidean distance, flat index).
template <class BlockedFn>
inline std::optional<Cell> nearest_traversable_cell(const GridLayout& geom, BlockedFn&& blocked,
                                                    const Cell& c, int max_ring) {
  if (geom.in_bounds(c) && !blocked(c)) return c;
  for (int r = 1; r <= max_ring; ++r) {
    std::optional<Cell> best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
        const Cell n{c.x + dx, c.y + dy};
        if (!geom.in_bounds(n) || blocked(n)) continue;
        const double d2 = double(dx) * dx + double(dy) * dy;
        if (d2 < best_d2 - 1e-12 ||
            (d2 < best_d2 + 1e-12 && best && geom.flat(n) < geom.flat(*best))) {
          best = n;
          best_d2 = d2;
        }
      }
    if (best) return best;
  }
  return std::nullopt;
}

/// Greedy polyline shortcutting: keeps a waypoint only when the straight
/// segment to the next candidate would sweep a blocked cell. Segments are
/// validated against every cell they touch, not just cell centers.
template <class BlockedFn>
inline std::vector<Vec2> shortcut_path(const GridLayout& geom, BlockedFn&& blocked,
                                       const std::vector<Cell>& cells) {
  std::vector<Vec2> out;
  if (cells.empty()) return out;
  auto segment_clear = [&](const Vec2& a, const Vec2& b) {
    bool clear = true;
    traverse_ray(geom, a, b, [&](const Cell& c) {
      if (blocked(c)) {
        clear = false;
        return false;
      }
      return true;
    });
    return clear;
  };

  std::size_t i = 0;
  out.push_back(geom.cell_center(cells[0]));
  while (i + 1 < cells.size()) {
    std::size_t j = cells.size() - 1;
    for (; j > i + 1; --j)
      if (segment_clear(geom.cell_center(cells[i]), geom.cell_center(cells[j]))) break;
    out.push_back(geom.cell_center(cells[j]));
    i = j;
  }
  return out;
}

// --- Velocity profiling ------------------------------------------------------

struct MotionLimits {
  double v_max = 0.5;
  double a_max = 1.0;
  double omega_max = 2.0;
  double rotate_threshold = 30.0 * kPi / 180.0;  // in-place rotation above this
};

struct TrajectoryPoint {
  Vec2 pos{0.0, 0.0};
  double heading = 0.0;
  double speed = 0.0;
  double eta = 0.0;  // seconds from trajectory start
};

struct BodyTwist {
  double v = 0.0;
  double omega = 0.0;
};

/// Time-sampled trajectory: executing controls[k] over one tick moves the
/// robot exactly from waypoint k to waypoint k+1 under `transition`.
struct PlannedTrajectory {
  std::vector<TrajectoryPoint> points;
  std::vector<BodyTwist> controls;
  double dt = 0.05;
  double total_length = 0.0;

  bool moving() const { return !controls.empty(); }
  double duration() const { return points.empty() ? 0.0 : points.back().eta; }
};

/// Peak speed of a rest-to-rest profile over length L.
inline double profile_peak_speed(double length, double v_max, double a_max) {
  return std::min(v_max, std::sqrt(a_max * length));
}

/// Duration of a rest-to-rest trapezoid/triangle over length L.
inline double profile_duration(double length, double v_max, double a_max) {
  if (length <= 0.0) return 0.0;
  const double v = profile_peak_speed(length, v_max, a_max);
  if (v < v_max) return 2.0 * std::sqrt(length / a_max);
  return length / v_max + v_max / a_max;
}

namespace detail {

/// Cruise speed that covers `length` in exactly `T` with accel bound `a`.
/// Requires T >= profile_duration(length, inf, a).
inline double stretched_cruise_speed(double length, double T, double a) {
  const double disc = a * a * T * T - 4.0 * a * length;
  return (a * T - std::sqrt(std::max(0.0, disc))) * 0.5;
}

/// Positions along a rest-to-rest profile sampled at dt; final sample lands
/// exactly on `length`.
inline std::vector<double> sample_profile(double length, double v_max, double a_max,
                                          double dt) {
  std::vector<double> arcs;
  if (length <= 0.0) return arcs;
  const double T = profile_duration(length, v_max, a_max);
  const int m = std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
  const double Ts = m * dt;
  const double v = stretched_cruise_speed(length, Ts, a_max);
  const double t_ramp = v / a_max;
  const double d_ramp = 0.5 * v * v / a_max;
  arcs.reserve(m);
  for (int j = 1; j <= m; ++j) {
    const double t = j * dt;
    double s;
    if (t <= t_ramp)
      s = 0.5 * a_max * t * t;
    else if (t <= Ts - t_ramp)
      s = d_ramp + v * (t - t_ramp);
    else {
      const double r = Ts - t;
      s = length - 0.5 * a_max * r * r;
    }
    arcs.push_back(std::min(s, length));
  }
  arcs.back() = length;
  return arcs;
}

}  // namespace detail

/// Builds a tick-sampled trajectory over a polyline: rest-to-rest speed
/// profiles over runs of shallow corners, in-place rotation (at omega_max)
/// wherever the heading change exceeds the rotation threshold. The sampled
/// waypoints replay exactly under `transition` with the emitted controls.
inline PlannedTrajectory profile_trajectory(const std::vector<Vec2>& polyline,
                                            double start_heading, const MotionLimits& lim,
                                            double dt) {
  if (dt <= 0.0) throw std::invalid_argument("profile_trajectory: bad dt");
  PlannedTrajectory traj;
  traj.dt = dt;

  // Collapse zero-length legs.
  std::vector<Vec2> pts;
  for (const auto& p : polyline)
    if (pts.empty() || (p - pts.back()).norm() > 1e-9) pts.push_back(p);

  const Vec2 start_pos = pts.empty() ? Vec2(0.0, 0.0) : pts.front();
  traj.points.push_back(TrajectoryPoint{start_pos, wrap_angle(start_heading), 0.0, 0.0});
  if (pts.size() < 2) return traj;

  std::vector<double> leg_heading(pts.size() - 1);
  std::vector<double> leg_len(pts.size() - 1);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 d = pts[i + 1] - pts[i];
    leg_heading[i] = std::atan2(d.y(), d.x());
    leg_len[i] = d.norm();
    traj.total_length += leg_len[i];
  }

  auto emit_rotation = [&](double target_heading) {
    const TrajectoryPoint last = traj.points.back();  // copy: push_back reallocates
    const double delta = wrap_angle(target_heading - last.heading);
    if (std::abs(delta) <= 1e-12) return;
    const int n = std::max(1, static_cast<int>(std::ceil(std::abs(delta) / (lim.omega_max * dt) - 1e-9)));
    for (int j = 1; j <= n; ++j)
      traj.points.push_back(TrajectoryPoint{last.pos,
                                            wrap_angle(last.heading + delta * j / n), 0.0, 0.0});
  };

  std::size_t leg = 0;
  while (leg < leg_heading.size()) {
    // A section is a maximal run of legs whose corners stay shallow.
    std::size_t end = leg + 1;
    while (end < leg_heading.size() &&
           std::abs(wrap_angle(leg_heading[end] - leg_heading[end - 1])) <=
               lim.rotate_threshold + 1e-12)
      ++end;

    // The start heading is the robot's actual pose, not a polyline artifact:
    // any initial mismatch must be turned away in place, or the controls would
    // silently assume a heading the robot does not have and the whole tape
    // would replay translated by that error. Interior corners stay subject to
    // the threshold: their turns live in the sampled positions themselves.
    const double align_tol =
        traj.points.size() == 1 ? 1e-9 : lim.rotate_threshold + 1e-12;
    if (std::abs(wrap_angle(leg_heading[leg] - traj.points.back().heading)) > align_tol)
      emit_rotation(leg_heading[leg]);

    double section_len = 0.0;
    for (std::size_t i = leg; i < end; ++i) section_len += leg_len[i];
    const auto arcs = detail::sample_profile(section_len, lim.v_max, lim.a_max, dt);

    // Walk the section polyline by arc length.
    std::size_t cur = leg;
    double consumed = 0.0;
    for (double s : arcs) {
      while (cur + 1 < end && s > consumed + leg_len[cur] + 1e-12) {
        consumed += leg_len[cur];
        ++cur;
      }
      const double along = std::min(s - consumed, leg_len[cur]);
      const Vec2 dir = (pts[cur + 1] - pts[cur]) / leg_len[cur];
      traj.points.push_back(
          TrajectoryPoint{pts[cur] + along * dir, leg_heading[cur], 0.0, 0.0});
    }
    leg = end;
  }

  // Final headings and controls come from the sampled positions themselves so
  // the tape replays bit-consistently under the Euler model.
  const std::size_t n = traj.points.size();
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const Vec2 d = traj.points[j + 1].pos - traj.points[j].pos;
    const double dist = d.norm();
    if (dist > 1e-12) traj.points[j].heading = std::atan2(d.y(), d.x());
  }
  for (std::size_t j = 0; j < n; ++j) {
    traj.points[j].eta = j * dt;
    if (j + 1 < n) {
      const double dist = (traj.points[j + 1].pos - traj.points[j].pos).norm();
      traj.points[j].speed = dist / dt;
    }
  }
  traj.controls.resize(n - 1);
  for (std::size_t j = 0; j + 1 < n; ++j)
    traj.controls[j] = BodyTwist{
        traj.points[j].speed,
        wrap_angle(traj.points[j + 1].heading - traj.points[j].heading) / dt};
  return traj;
}

inline PlannedTrajectory profile_trajectory(const std::vector<Cell>& cells,
                                            const GridLayout& geom, double start_heading,
                                            const MotionLimits& lim, double dt) {
  std::vector<Vec2> pts;
  pts.reserve(cells.size());
  for (const auto& c : cells) pts.push_back(geom.cell_center(c));
  return profile_trajectory(pts, start_heading, lim, dt);
}

// --- Uncertainty propagation and collision prediction ------------------------

/// Open-loop belief rollout along the tape: predict-only EKF steps, recorded
/// every `sample_interval` seconds out to `horizon` meters of arc (or tape
/// end). First element is the input belief; stamps are absolute.
inline std::vector<Belief> propagate_uncertainty(const Belief& b, const PlannedTrajectory& traj,
                                                 double horizon, const NoiseModel& noise,
                                                 double sample_interval = 0.2,
                                                 std::size_t first_control = 0) {
  if (!b.initialized) throw std::logic_error("propagate_uncertainty: belief not initialized");
  std::vector<Belief> out{b};
  if (first_control >= traj.controls.size()) return out;

  const int stride = std::max(1, static_cast<int>(std::lround(sample_interval / traj.dt)));
  Belief cur = b;
  double arc = 0.0;
  int since_record = 0;
  for (std::size_t j = first_control; j < traj.controls.size(); ++j) {
    const BodyTwist& u = traj.controls[j];
    cur = ekf_predict(cur, Vec3(u.v, 0.0, u.omega), traj.dt, noise);
    arc += u.v * traj.dt;
    ++since_record;
    const bool done = (arc >= horizon - 1e-12) || (j + 1 == traj.controls.size());
    if (since_record >= stride || done) {
      out.push_back(cur);
      since_record = 0;
    }
    if (done) break;
  }
  return out;
}

/// 3-sigma ellipse of a 2D position covariance. Axes are unit, orthogonal,
/// major first; an isotropic covariance canonicalizes to the +x axis.
struct SigmaEllipse {
  double a = 0.0;  // major semi-axis, 3*sqrt(lambda1)
  double b = 0.0;  // minor semi-axis
  Vec2 v1{1.0, 0.0};
  Vec2 v2{0.0, 1.0};
};

inline SigmaEllipse sigma_ellipse(const Mat2& cov_xy) {
  const Mat2 sym = 0.5 * (cov_xy + cov_xy.transpose());
  Eigen::SelfAdjointEigenSolver<Mat2> es;
  es.computeDirect(sym);
  double l0 = es.eigenvalues()(0);  // ascending
  double l1 = es.eigenvalues()(1);
  if (l0 < -1e-9) throw std::invalid_argument("sigma_ellipse: covariance not PSD");
  l0 = std::max(0.0, l0);
  l1 = std::max(0.0, l1);

  SigmaEllipse e;
  e.a = 3.0 * std::sqrt(l1);
  e.b = 3.0 * std::sqrt(l0);
  if (l1 - l0 <= 1e-12 * std::max(l1, 1e-300)) {
    e.v1 = Vec2(1.0, 0.0);  // circle: pin the axes
  } else {
    e.v1 = es.eigenvectors().col(1);
    if (e.v1.x() < 0.0 || (e.v1.x() == 0.0 && e.v1.y() < 0.0)) e.v1 = -e.v1;
  }
  e.v2 = Vec2(-e.v1.y(), e.v1.x());
  return e;
}

/// Visits every cell whose center satisfies the ellipse membership
/// inequality around `center`, bounding-box scan; always includes the
/// center's own cell. The visitor returns false to stop. Returns false if
/// any visited cell was out of bounds (caller decides how to treat that).
template <class Visitor>
inline bool visit_ellipse_cells(const GridLayout& geom, const Vec2& center,
                                const SigmaEllipse& e, Visitor&& visit) {
  const double hx = std::sqrt(sq(e.a * e.v1.x()) + sq(e.b * e.v2.x()));
  const double hy = std::sqrt(sq(e.a * e.v1.y()) + sq(e.b * e.v2.y()));
  const auto center_cell = geom.world_to_grid(center);
  if (!center_cell) return false;

  const int x0 = static_cast<int>(std::floor((center.x() - hx - geom.origin.x()) / geom.resolution));
  const int x1 = static_cast<int>(std::floor((center.x() + hx - geom.origin.x()) / geom.resolution));
  const int y0 = static_cast<int>(std::floor((center.y() - hy - geom.origin.y()) / geom.resolution));
  const int y1 = static_cast<int>(std::floor((center.y() + hy - geom.origin.y()) / geom.resolution));

  bool all_in_bounds = true;
  auto inside = [&](const Vec2& d) {
    const double u = d.dot(e.v1);
    const double w = d.dot(e.v2);
    const double ua = e.a > 1e-12 ? sq(u / e.a) : (std::abs(u) <= 1e-9 ? 0.0 : 2.0);
    const double wb = e.b > 1e-12 ? sq(w / e.b) : (std::abs(w) <= 1e-9 ? 0.0 : 2.0);
    return ua + wb <= 1.0 + 1e-12;
  };

  for (int iy = y0; iy <= y1; ++iy)
    for (int ix = x0; ix <= x1; ++ix) {
      const Cell c{ix, iy};
      const bool is_center = c == *center_cell;
      if (!is_center && !inside(geom.cell_center(ix, iy) - center)) continue;
      if (!geom.in_bounds(c)) {
        all_in_bounds = false;
        continue;
      }
      if (!visit(c)) return all_in_bounds;
    }
  return all_in_bounds;
}

inline std::vector<Cell> ellipse_cells(const GridLayout& geom, const Vec2& center,
                                       const SigmaEllipse& e) {
  std::vector<Cell> cells;
  visit_ellipse_cells(geom, center, e, [&](const Cell& c) {
    cells.push_back(c);
    return true;
  });
  return cells;
}

/// Support request: where the robot expects trouble, when, and where the
/// observer should come to help.
struct CollisionInfo {
  int ugv_id = -1;
  Vec2 p_ps{0.0, 0.0};   // support point
  double t_pc = 0.0;     // predicted collision time, absolute
  Vec2 p_pc{0.0, 0.0};   // predicted collision ellipse center
  double issued_at = 0.0;
};

/// p_pc pulled back `setback` meters against the planned direction; if that
/// lands on a blocked or off-map cell, walk the already-planned path samples
/// backward to the first clear one; last resort is the robot's own position.
template <class SupportBlockedFn>
inline Vec2 select_support_point(const Vec2& p_pc, const Vec2& dir, double setback,
                                 const GridLayout& geom, SupportBlockedFn&& blocked,
                                 const std::vector<Vec2>& path_back, const Vec2& fallback) {
  auto usable = [&](const Vec2& p) {
    const auto c = geom.world_to_grid(p);
    return c && !blocked(*c);
  };
  const Vec2 cand = p_pc - setback * dir;
  if (usable(cand)) return cand;
  for (auto it = path_back.rbegin(); it != path_back.rend(); ++it)
    if (usable(*it)) return *it;
  return fallback;
}

struct PredictParams {
  double setback = 1.5;
  double max_ellipse_axis = 3.0;  // beyond this the sample counts as colliding outright
};

/// Scans propagated beliefs in ETA order; the first whose 3-sigma ellipse
/// touches a blocked cell (collision view, inflated) yields a CollisionInfo.
/// Cells beyond the map edge count as blocked. `collision_blocked` and
/// `support_blocked` are cell predicates for the CP and P views.
template <class CollisionBlockedFn, class SupportBlockedFn>
inline std::optional<CollisionInfo> predict_collision(
    const std::vector<Belief>& beliefs, const GridLayout& geom,
    CollisionBlockedFn&& collision_blocked, SupportBlockedFn&& support_blocked,
    const PredictParams& params, int ugv_id, double now, const Vec2& current_pos) {
  if (beliefs.empty()) return std::nullopt;

  std::vector<Vec2> path_so_far;
  path_so_far.reserve(beliefs.size());
  for (const auto& b : beliefs) {
    const Vec2 center = b.position();
    bool hit = false;
    const SigmaEllipse e = sigma_ellipse(b.cov.topLeftCorner<2, 2>());
    if (e.a > params.max_ellipse_axis) {
      hit = true;  // uncertainty beyond any useful bound: treat as colliding
    } else {
      const bool in_bounds = visit_ellipse_cells(geom, center, e, [&](const Cell& c) {
        if (collision_blocked(c)) {
          hit = true;
          return false;
        }
        return true;
      });
      if (!in_bounds) hit = true;
    }
    if (hit) {
      CollisionInfo info;
      info.ugv_id = ugv_id;
      info.p_pc = center;
      info.t_pc = b.stamp;
      info.issued_at = now;
      const Vec2 dir(std::cos(b.heading()), std::sin(b.heading()));
      info.p_ps = select_support_point(center, dir, params.setback, geom, support_blocked,
                                       path_so_far, current_pos);
      return info;
    }
    path_so_far.push_back(center);
  }
  return std::nullopt;
}

/// Spec-shaped wrapper operating directly on a map.
inline std::optional<CollisionInfo> predict_collision(const std::vector<Belief>& beliefs,
                                                      const GridMap& map, double inflation,
                                                      const PredictParams& params, int ugv_id,
                                                      double now, const Vec2& current_pos) {
  auto cp = [&](const Cell& c) {
    return !is_traversable(map, c, TraversalView::Collision, inflation);
  };
  auto pv = [&](const Cell& c) {
    return !is_traversable(map, c, TraversalView::Planning, inflation);
  };
  return predict_collision(beliefs, map.geom, cp, pv, params, ugv_id, now, current_pos);
}

// --- Stop-and-wait guard ------------------------------------------------------

enum class MotionMode { Proceed, StopAndWait };

/// Halt whenever a predicted collision deadline is closer than t_c.
inline MotionMode wait_guard(double now, const std::optional<CollisionInfo>& info, double t_c) {
  if (info && info->t_pc - now < t_c) return MotionMode::StopAndWait;
  return MotionMode::Proceed;
}

}  // namespace colag
