#pragma once

#include <cstdint>
#include <deque>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "colag/geometry.hpp"
#include "colag/grid_map.hpp"
#include "colag/rng.hpp"

namespace colag {

struct Disk {
  Vec2 center{0.0, 0.0};
  double radius = 0.0;
};

/// Static world description: a rectangular field [0, extent] with disk
/// obstacles, per-robot start poses and goals.
struct Scenario {
  std::uint64_t seed = 0;
  Vec2 extent{27.0, 27.0};
  std::vector<Disk> obstacles;
  std::vector<Pose2> ugv_starts;
  std::vector<Vec2> ugv_goals;
  Pose2 uav_start;
};

/// True (simulated) occupancy at a world point; obstacle boundaries count as
/// occupied.
inline bool ground_truth_occupied(const Scenario& sc, const Vec2& p) {
  for (const auto& d : sc.obstacles)
    if (point_in_disk(p, d.center, d.radius)) return true;
  return false;
}

struct ScenarioParams {
  int obstacle_count = 40;
  int ugv_count = 3;
  double obstacle_radius_min = 0.3;
  double obstacle_radius_max = 0.8;
  double spawn_clearance = 0.5;      // robot center to obstacle surface
  double spawn_spacing = 1.2;        // between robot starts (and between goals)
  double group_spread = 4.0;         // starts (and goals) stay within this of the first
  double corridor_clearance = 0.6;   // inflation used by the connectivity check
  double edge_margin = 1.0;          // keep starts/goals off the field boundary
  double band_depth = 1.5;           // start band [m, m+d], goal band mirrored
  int placement_retry_budget = 1000;
  int attempt_budget = 50;
  double validation_resolution = 0.1;
};

struct PlacementInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double clearance_to_obstacles(const Scenario& sc, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& d : sc.obstacles)
    best = std::min(best, (p - d.center).norm() - d.radius);
  return best;
}

/// BFS reachability on a coarse rasterization with obstacle radii inflated by
/// `clearance`; guarantees every start-goal pair admits a corridor wide
/// enough for the planner's own inflation.
inline bool corridor_exists(const Scenario& sc, const Vec2& from, const Vec2& to,
                            double clearance, double res) {
  GridLayout g;
  g.resolution = res;
  g.origin = Vec2(0.0, 0.0);
  g.width = static_cast<int>(std::ceil(sc.extent.x() / res - 1e-9));
  g.height = static_cast<int>(std::ceil(sc.extent.y() / res - 1e-9));

  std::vector<std::uint8_t> blocked(g.cell_count(), 0);
  for (const auto& d : sc.obstacles) {
    const double r = d.radius + clearance;
    const int x0 = std::max(0, static_cast<int>(std::floor((d.center.x() - r) / res)));
    const int x1 = std::min(g.width - 1, static_cast<int>(std::floor((d.center.x() + r) / res)));
    const int y0 = std::max(0, static_cast<int>(std::floor((d.center.y() - r) / res)));
    const int y1 = std::min(g.height - 1, static_cast<int>(std::floor((d.center.y() + r) / res)));
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix)
        if ((g.cell_center(ix, iy) - d.center).norm() <= r) blocked[g.flat(ix, iy)] = 1;
  }

  const auto a = g.world_to_grid(from);
  const auto b = g.world_to_grid(to);
  if (!a || !b) return false;
  if (blocked[g.flat(*a)] || blocked[g.flat(*b)]) return false;

  std::vector<std::uint8_t> seen(g.cell_count(), 0);
  std::deque<Cell> queue{*a};
  seen[g.flat(*a)] = 1;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == *b) return true;
    static const int dx[4] = {1, -1, 0, 0};
    static const int dy[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = c.x + dx[k], ny = c.y + dy[k];
      if (!g.in_bounds(nx, ny)) continue;
      const std::size_t f = g.flat(nx, ny);
      if (seen[f] || blocked[f]) continue;
      seen[f] = 1;
      queue.push_back(Cell{nx, ny});
    }
  }
  return false;
}

}  // namespace detail

/// Draws a random field: obstacles anywhere, UGV starts in a band on the left
/// edge, goals in a band on the right, UAV starting amid the UGVs. Placement
/// is rejection-sampled; whole attempts restart when the connectivity check
/// fails. Deterministic in (seed, params). Throws PlacementInfeasible when
/// the retry budgets run out.
inline Scenario generate_scenario(std::uint64_t seed, const Vec2& extent,
                                  const ScenarioParams& params) {
  if (params.obstacle_count < 0 || params.ugv_count < 1)
    throw std::invalid_argument("generate_scenario: bad counts");
  if (extent.x() <= 2.0 * params.edge_margin + 2.0 * params.band_depth)
    throw std::invalid_argument("generate_scenario: extent too small for start/goal bands");

  for (int attempt = 0; attempt < params.attempt_budget; ++attempt) {
    Scenario sc;
    sc.seed = seed;
    sc.extent = extent;

    RngStream obs_rng(seed, "scenario/obstacles/" + std::to_string(attempt));
    RngStream rob_rng(seed, "scenario/robots/" + std::to_string(attempt));

    sc.obstacles.reserve(params.obstacle_count);
    for (int i = 0; i < params.obstacle_count; ++i) {
      Disk d;
      d.center = Vec2(obs_rng.uniform(0.0, extent.x()), obs_rng.uniform(0.0, extent.y()));
      d.radius = obs_rng.uniform(params.obstacle_radius_min, params.obstacle_radius_max);
      sc.obstacles.push_back(d);
    }

    const double x_start_lo = params.edge_margin;
    const double x_start_hi = params.edge_margin + params.band_depth;
    const double x_goal_hi = extent.x() - params.edge_margin;
    const double x_goal_lo = x_goal_hi - params.band_depth;
    const double y_lo = params.edge_margin;
    const double y_hi = extent.y() - params.edge_margin;

    // The team deploys as a group: later robots stay within group_spread of
    // the first placement so a single observer can plausibly cover them.
    auto place_in_band = [&](double xlo, double xhi, const std::vector<Vec2>& others,
                             Vec2& out) {
      double ylo = y_lo, yhi = y_hi;
      if (!others.empty()) {
        ylo = std::max(y_lo, others.front().y() - params.group_spread);
        yhi = std::min(y_hi, others.front().y() + params.group_spread);
      }
      for (int tries = 0; tries < params.placement_retry_budget; ++tries) {
        const Vec2 cand(rob_rng.uniform(xlo, xhi), rob_rng.uniform(ylo, yhi));
        if (detail::clearance_to_obstacles(sc, cand) < params.spawn_clearance) continue;
        bool spaced = true;
        for (const auto& o : others)
          if ((cand - o).norm() < params.spawn_spacing) { spaced = false; break; }
        if (!spaced) continue;
        out = cand;
        return true;
      }
      return false;
    };

    bool ok = true;
    std::vector<Vec2> starts, goals;
    for (int i = 0; i < params.ugv_count && ok; ++i) {
      Vec2 s, g;
      ok = place_in_band(x_start_lo, x_start_hi, starts, s) &&
           place_in_band(x_goal_lo, x_goal_hi, goals, g);
      if (ok) {
        starts.push_back(s);
        goals.push_back(g);
      }
    }
    if (!ok) continue;

    for (int i = 0; i < params.ugv_count && ok; ++i)
      ok = detail::corridor_exists(sc, starts[i], goals[i], params.corridor_clearance,
                                   params.validation_resolution);
    if (!ok) continue;

    for (int i = 0; i < params.ugv_count; ++i) {
      sc.ugv_starts.push_back(Pose2{starts[i], 0.0});
      sc.ugv_goals.push_back(goals[i]);
    }

    // UAV hovers in from just ahead of the group so first contact is instant.
    Vec2 centroid(0.0, 0.0);
    for (const auto& s : starts) centroid += s;
    centroid /= static_cast<double>(params.ugv_count);
    Vec2 uav = centroid + Vec2(0.8, 0.0);
    uav.x() = std::min(std::max(uav.x(), 0.5), extent.x() - 0.5);
    uav.y() = std::min(std::max(uav.y(), 0.5), extent.y() - 0.5);
    sc.uav_start = Pose2{uav, 0.0};
    return sc;
  }
  throw PlacementInfeasible("generate_scenario: attempt budget exhausted");
}

// --- JSON round trip ---------------------------------------------------------

inline void to_json(nlohmann::json& j, const Disk& d) {
  j = nlohmann::json{{"center", {d.center.x(), d.center.y()}}, {"radius", d.radius}};
}
inline void from_json(const nlohmann::json& j, Disk& d) {
  d.center = Vec2(j.at("center").at(0).get<double>(), j.at("center").at(1).get<double>());
  d.radius = j.at("radius").get<double>();
}

inline void to_json(nlohmann::json& j, const Pose2& p) {
  j = nlohmann::json{{"x", p.p.x()}, {"y", p.p.y()}, {"theta", p.theta}};
}
inline void from_json(const nlohmann::json& j, Pose2& p) {
  p.p = Vec2(j.at("x").get<double>(), j.at("y").get<double>());
  p.theta = j.at("theta").get<double>();
}

inline void to_json(nlohmann::json& j, const Scenario& sc) {
  nlohmann::json goals = nlohmann::json::array();
  for (const auto& g : sc.ugv_goals) goals.push_back({g.x(), g.y()});
  j = nlohmann::json{{"seed", sc.seed},
                     {"extent", {sc.extent.x(), sc.extent.y()}},
                     {"obstacles", sc.obstacles},
                     {"ugv_starts", sc.ugv_starts},
                     {"ugv_goals", goals},
                     {"uav_start", sc.uav_start}};
}
inline void from_json(const nlohmann::json& j, Scenario& sc) {
  sc.seed = j.at("seed").get<std::uint64_t>();
  sc.extent = Vec2(j.at("extent").at(0).get<double>(), j.at("extent").at(1).get<double>());
  sc.obstacles = j.at("obstacles").get<std::vector<Disk>>();
  sc.ugv_starts = j.at("ugv_starts").get<std::vector<Pose2>>();
  sc.ugv_goals.clear();
  for (const auto& g : j.at("ugv_goals"))
    sc.ugv_goals.push_back(Vec2(g.at(0).get<double>(), g.at(1).get<double>()));
  sc.uav_start = j.at("uav_start").get<Pose2>();
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_scenario: cannot open " + path);
  out << nlohmann::json(sc).dump(2) << "\n";
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_scenario: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j.get<Scenario>();
}

}  // namespace colag
