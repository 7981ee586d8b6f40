#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "colag/geometry.hpp"
#include "colag/ugv_nav.hpp"

namespace colag {

/// Cruise travel time between two support points.
inline double travel_time_between(const Vec2& p1, const Vec2& p2, double v_max) {
  if (v_max <= 0.0) throw std::invalid_argument("travel_time_between: v_max must be positive");
  return (p1 - p2).norm() / v_max;
}

/// First-leg travel time from the vehicle's current kinematic state: the
/// velocity component toward the target seeds an accelerate-then-cruise
/// profile (no terminal stop). With the toward-target component already at
/// v_max this reduces to distance / v_max.
inline double travel_time_from_start(const Vec2& p_a, const Vec2& v_a, const Vec2& p_ps,
                                     double v_max, double a_max) {
  if (v_max <= 0.0 || a_max <= 0.0)
    throw std::invalid_argument("travel_time_from_start: limits must be positive");
  const Vec2 to_target = p_ps - p_a;
  const double d = to_target.norm();
  if (d <= 1e-12) return 0.0;
  double v_tan = v_a.dot(to_target / d);
  v_tan = std::min(v_tan, v_max);
  const double dis_a = (v_max * v_max - v_tan * v_tan) / (2.0 * a_max);
  if (dis_a > d) return (std::sqrt(v_tan * v_tan + 2.0 * a_max * d) - v_tan) / a_max;
  return (v_max - v_tan) / a_max + (d - dis_a) / v_max;
}

struct NodeMeta {
  int ugv_id = -1;
  Vec2 p_ps{0.0, 0.0};
};

/// Single-vehicle open-tour routing instance. Node 0 is the vehicle's
/// current state; nodes 1..n are support points with deadline-only windows
/// relative to `now`. Returning costs nothing (open tour).
struct VrptwInstance {
  int n = 0;
  Eigen::MatrixXd cost;                            // (n+1) x (n+1), seconds
  std::vector<std::pair<double, double>> windows;  // [open, close] per node
  std::vector<NodeMeta> node_meta;                 // size n+1, slot 0 unused
};

/// Builds the routing instance from outstanding requests. Requests whose
/// deadline is not strictly in the future are an error; the caller filters.
inline VrptwInstance build_vrptw(const Vec2& uav_pos, const Vec2& uav_vel,
                                 const std::vector<CollisionInfo>& requests, double now,
                                 double v_max, double a_max) {
  const int n = static_cast<int>(requests.size());
  VrptwInstance inst;
  inst.n = n;
  inst.cost = Eigen::MatrixXd::Zero(n + 1, n + 1);
  inst.windows.assign(n + 1, {0.0, std::numeric_limits<double>::infinity()});
  inst.node_meta.assign(n + 1, NodeMeta{});

  for (int k = 1; k <= n; ++k) {
    const auto& r = requests[k - 1];
    if (r.t_pc <= now) throw std::invalid_argument("build_vrptw: stale request deadline");
    inst.node_meta[k] = NodeMeta{r.ugv_id, r.p_ps};
    inst.windows[k] = {0.0, r.t_pc - now};
    inst.cost(0, k) = travel_time_from_start(uav_pos, uav_vel, r.p_ps, v_max, a_max);
    inst.cost(k, 0) = 0.0;  // free return
  }
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) {
      const double t = travel_time_between(inst.node_meta[i].p_ps, inst.node_meta[j].p_ps, v_max);
      inst.cost(i, j) = t;
      inst.cost(j, i) = t;
    }
  return inst;
}

/// Visit order with its schedule. `feasible` means every arrival met its
/// window close; otherwise violation_count/violation_sum describe the misses.
struct Tour {
  std::vector<int> order;
  std::vector<double> arrival;
  double makespan = 0.0;
  double v_used = 0.0;
  bool feasible = false;
  int violation_count = 0;
  double violation_sum = 0.0;
};

/// Recomputes arrivals and window violations for a visit order.
inline Tour evaluate_tour(const VrptwInstance& inst, const std::vector<int>& order,
                          double tol = 1e-12) {
  Tour t;
  t.order = order;
  t.arrival.reserve(order.size());
  double clock = 0.0;
  int prev = 0;
  for (int node : order) {
    clock += inst.cost(prev, node);
    t.arrival.push_back(clock);
    const double over = clock - inst.windows[node].second;
    if (over > tol) {
      ++t.violation_count;
      t.violation_sum += over;
    }
    prev = node;
  }
  t.makespan = clock;
  t.feasible = t.violation_count == 0;
  return t;
}

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Exact minimum-makespan tour over all nodes with deadline pruning:
/// Held-Karp over subsets, state = (visited set, last node), value = earliest
/// completion time. Earliest arrival is optimal here because windows have no
/// lower bounds, so no state benefits from waiting.
inline std::optional<Tour> solve_exact(const VrptwInstance& inst) {
  const int n = inst.n;
  const std::size_t states = std::size_t(1) << n;
  std::vector<double> dp(states * n, kInf);
  std::vector<std::int8_t> parent(states * n, -1);

  for (int j = 0; j < n; ++j) {
    const double t = inst.cost(0, j + 1);
    if (t <= inst.windows[j + 1].second + 1e-12) {
      dp[(std::size_t(1) << j) * n + j] = t;
      parent[(std::size_t(1) << j) * n + j] = j;
    }
  }

  for (std::size_t mask = 1; mask < states; ++mask)
    for (int last = 0; last < n; ++last) {
      const double base = dp[mask * n + last];
      if (base == kInf || !(mask & (std::size_t(1) << last))) continue;
      for (int nxt = 0; nxt < n; ++nxt) {
        if (mask & (std::size_t(1) << nxt)) continue;
        const double t = base + inst.cost(last + 1, nxt + 1);
        if (t > inst.windows[nxt + 1].second + 1e-12) continue;
        const std::size_t key = (mask | (std::size_t(1) << nxt)) * n + nxt;
        if (t < dp[key] - 1e-15) {
          dp[key] = t;
          parent[key] = static_cast<std::int8_t>(last);
        }
      }
    }

  const std::size_t full = states - 1;
  int best_last = -1;
  double best = kInf;
  for (int j = 0; j < n; ++j)
    if (dp[full * n + j] < best - 1e-15) {
      best = dp[full * n + j];
      best_last = j;
    }
  if (best_last < 0) return std::nullopt;

  std::vector<int> order;
  std::size_t mask = full;
  int at = best_last;
  while (true) {
    order.push_back(at + 1);
    const int par = parent[mask * n + at];
    const std::size_t without = mask & ~(std::size_t(1) << at);
    if (without == 0) break;
    mask = without;
    at = par;
  }
  std::reverse(order.begin(), order.end());
  return evaluate_tour(inst, order);
}

/// Nodes sorted by earliest deadline, ties by node id.
inline std::vector<int> edd_order(const VrptwInstance& inst) {
  std::vector<int> order(inst.n);
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return inst.windows[a].second < inst.windows[b].second;
  });
  return order;
}

template <class Better>
inline bool local_search(const VrptwInstance& inst, Tour& best, Better&& better) {
  bool improved_any = false;
  bool improved = true;
  int guard = 0;
  while (improved && ++guard < 200) {
    improved = false;
    const int m = static_cast<int>(best.order.size());
    // 2-opt: reverse a segment.
    for (int i = 0; i < m - 1 && !improved; ++i)
      for (int j = i + 1; j < m && !improved; ++j) {
        std::vector<int> cand = best.order;
        std::reverse(cand.begin() + i, cand.begin() + j + 1);
        Tour t = evaluate_tour(inst, cand);
        if (better(t, best)) {
          best = std::move(t);
          improved = improved_any = true;
        }
      }
    // or-opt: relocate one node.
    for (int i = 0; i < m && !improved; ++i)
      for (int j = 0; j < m && !improved; ++j) {
        if (i == j) continue;
        std::vector<int> cand = best.order;
        const int node = cand[i];
        cand.erase(cand.begin() + i);
        cand.insert(cand.begin() + j, node);
        Tour t = evaluate_tour(inst, cand);
        if (better(t, best)) {
          best = std::move(t);
          improved = improved_any = true;
        }
      }
  }
  return improved_any;
}

inline std::optional<Tour> solve_heuristic(const VrptwInstance& inst) {
  auto better_makespan = [](const Tour& a, const Tour& b) {
    return a.feasible && (!b.feasible || a.makespan < b.makespan - 1e-12);
  };

  std::optional<Tour> best;
  Tour edd = evaluate_tour(inst, edd_order(inst));
  if (edd.feasible) best = edd;

  if (!best) {
    // Cheapest feasible insertion from an empty route.
    std::vector<int> route;
    std::vector<int> remaining = edd_order(inst);
    while (!remaining.empty()) {
      double best_cost = kInf;
      int best_node_idx = -1, best_pos = -1;
      for (std::size_t r = 0; r < remaining.size(); ++r)
        for (std::size_t pos = 0; pos <= route.size(); ++pos) {
          std::vector<int> cand = route;
          cand.insert(cand.begin() + pos, remaining[r]);
          Tour t = evaluate_tour(inst, cand);
          if (t.feasible && t.makespan < best_cost - 1e-12) {
            best_cost = t.makespan;
            best_node_idx = static_cast<int>(r);
            best_pos = static_cast<int>(pos);
          }
        }
      if (best_node_idx < 0) return std::nullopt;  // construction stuck
      route.insert(route.begin() + best_pos, remaining[best_node_idx]);
      remaining.erase(remaining.begin() + best_node_idx);
    }
    best = evaluate_tour(inst, route);
    if (!best->feasible) return std::nullopt;
  }

  local_search(inst, *best, better_makespan);
  return best;
}

}  // namespace detail

/// Minimum-makespan tour visiting all nodes within their windows, or nullopt
/// when no order is feasible. Exact (subset DP) up to `exact_threshold`
/// nodes, insertion + 2-opt/or-opt beyond.
inline std::optional<Tour> solve_vrptw(const VrptwInstance& inst, int exact_threshold = 12) {
  if (inst.n == 0) return Tour{};  // empty tour, trivially feasible
  std::optional<Tour> t = inst.n <= exact_threshold ? detail::solve_exact(inst)
                                                    : detail::solve_heuristic(inst);
  if (t) t->feasible = true;
  return t;
}

/// Tour minimizing (violation count, violation magnitude, makespan) for
/// instances that are infeasible even at the speed cap. Exact for n <= 8 by
/// enumerating permutations in lexicographic order; EDD + local search above.
inline Tour min_violation_tour(const VrptwInstance& inst) {
  auto better = [](const Tour& a, const Tour& b) {
    if (a.violation_count != b.violation_count) return a.violation_count < b.violation_count;
    if (std::abs(a.violation_sum - b.violation_sum) > 1e-12)
      return a.violation_sum < b.violation_sum;
    return a.makespan < b.makespan - 1e-12;
  };

  if (inst.n <= 8) {
    std::vector<int> perm(inst.n);
    std::iota(perm.begin(), perm.end(), 1);
    Tour best = evaluate_tour(inst, perm);
    while (std::next_permutation(perm.begin(), perm.end())) {
      Tour t = evaluate_tour(inst, perm);
      if (better(t, best)) best = std::move(t);
    }
    return best;
  }
  Tour best = evaluate_tour(inst, detail::edd_order(inst));
  detail::local_search(inst, best, better);
  return best;
}

struct ScheduleResult {
  Tour tour;
  double v_used = 0.0;
  VrptwInstance instance;  // instance at the certified speed, for audit/dispatch
};

struct EscalationLadder {
  double factor = 1.25;
  double cap = 4.0;  // multiple of base speed

  std::vector<double> rungs(double base) const {
    std::vector<double> out;
    double m = 1.0;
    while (m < cap - 1e-12) {
      out.push_back(base * m);
      m *= factor;
    }
    out.push_back(base * cap);
    return out;
  }
};

/// Retries the solve at escalating speeds until feasible; at the cap, falls
/// back to the violation-minimizing tour (affected UGVs stop safely on their
/// own wait guard).
inline ScheduleResult schedule(const Vec2& uav_pos, const Vec2& uav_vel,
                               const std::vector<CollisionInfo>& requests, double now,
                               double base_v_max, double a_max,
                               const EscalationLadder& ladder = {}, int exact_threshold = 12) {
  if (requests.empty()) throw std::invalid_argument("schedule: no requests");
  ScheduleResult out;
  for (double v : ladder.rungs(base_v_max)) {
    VrptwInstance inst = build_vrptw(uav_pos, uav_vel, requests, now, v, a_max);
    auto tour = solve_vrptw(inst, exact_threshold);
    if (tour) {
      out.tour = *tour;
      out.tour.v_used = v;
      out.v_used = v;
      out.instance = std::move(inst);
      return out;
    }
  }
  const double v = base_v_max * ladder.cap;
  VrptwInstance inst = build_vrptw(uav_pos, uav_vel, requests, now, v, a_max);
  out.tour = min_violation_tour(inst);
  out.tour.v_used = v;
  out.v_used = v;
  out.instance = std::move(inst);
  return out;
}

namespace detail {

/// Instance for the remainder of a tour whose first visit is already fixed:
/// the clock restarts at the pinned node, so every surviving window shifts
/// left by the committed first leg. `keep[i-1]` maps sub node i back to its
/// node in the full instance.
inline VrptwInstance rebase_after(const VrptwInstance& inst, int head, double head_arrival,
                                  std::vector<int>& keep) {
  keep.clear();
  for (int k = 1; k <= inst.n; ++k)
    if (k != head) keep.push_back(k);
  VrptwInstance sub;
  sub.n = static_cast<int>(keep.size());
  sub.cost = Eigen::MatrixXd::Zero(sub.n + 1, sub.n + 1);
  sub.windows.assign(sub.n + 1, {0.0, kInf});
  sub.node_meta.assign(sub.n + 1, NodeMeta{});
  sub.node_meta[0] = inst.node_meta[head];
  for (int i = 1; i <= sub.n; ++i) {
    sub.node_meta[i] = inst.node_meta[keep[i - 1]];
    sub.windows[i] = {0.0, inst.windows[keep[i - 1]].second - head_arrival};
    sub.cost(0, i) = inst.cost(head, keep[i - 1]);
    for (int j = 1; j <= sub.n; ++j)
      if (i != j) sub.cost(i, j) = inst.cost(keep[i - 1], keep[j - 1]);
  }
  return sub;
}

inline Tour compose_after(const VrptwInstance& inst, int head, const Tour& sub,
                          const std::vector<int>& keep) {
  std::vector<int> order;
  order.reserve(sub.order.size() + 1);
  order.push_back(head);
  for (int node : sub.order) order.push_back(keep[node - 1]);
  return evaluate_tour(inst, order);
}

}  // namespace detail

/// `schedule` with one request pinned to the head of the tour; the solver
/// orders only the remainder. Keeps an in-flight visit from flapping between
/// near-tied tours, where lateness accruing toward whichever robot the
/// vehicle is currently leaving behind would turn it around on every
/// re-solve and it would never arrive anywhere.
inline ScheduleResult schedule_headlocked(const Vec2& uav_pos, const Vec2& uav_vel,
                                          const std::vector<CollisionInfo>& requests, double now,
                                          int head_ugv, double base_v_max, double a_max,
                                          const EscalationLadder& ladder = {},
                                          int exact_threshold = 12) {
  if (requests.empty()) throw std::invalid_argument("schedule_headlocked: no requests");
  const auto find_head = [&](const VrptwInstance& inst) {
    for (int k = 1; k <= inst.n; ++k)
      if (inst.node_meta[k].ugv_id == head_ugv) return k;
    throw std::invalid_argument("schedule_headlocked: head not among requests");
  };

  ScheduleResult out;
  for (double v : ladder.rungs(base_v_max)) {
    VrptwInstance inst = build_vrptw(uav_pos, uav_vel, requests, now, v, a_max);
    const int head = find_head(inst);
    const double head_arrival = inst.cost(0, head);
    if (head_arrival > inst.windows[head].second + 1e-12) continue;
    std::optional<Tour> full;
    if (inst.n == 1) {
      full = evaluate_tour(inst, {head});
    } else {
      std::vector<int> keep;
      const VrptwInstance sub = detail::rebase_after(inst, head, head_arrival, keep);
      if (auto st = solve_vrptw(sub, exact_threshold))
        full = detail::compose_after(inst, head, *st, keep);
    }
    if (full && full->feasible) {
      out.tour = *full;
      out.tour.v_used = v;
      out.v_used = v;
      out.instance = std::move(inst);
      return out;
    }
  }
  const double v = base_v_max * ladder.cap;
  VrptwInstance inst = build_vrptw(uav_pos, uav_vel, requests, now, v, a_max);
  const int head = find_head(inst);
  if (inst.n == 1) {
    out.tour = evaluate_tour(inst, {head});
  } else {
    std::vector<int> keep;
    const VrptwInstance sub = detail::rebase_after(inst, head, inst.cost(0, head), keep);
    out.tour = detail::compose_after(inst, head, min_violation_tour(sub), keep);
  }
  out.tour.v_used = v;
  out.v_used = v;
  out.instance = std::move(inst);
  return out;
}

struct UavTarget {
  Vec2 point{0.0, 0.0};
  double speed = 0.0;
  int node = -1;
  int ugv_id = -1;
};

/// First unserved node of the active tour. `served` is indexed by node id.
inline std::optional<UavTarget> current_waypoint(const Tour& tour,
                                                 const std::vector<NodeMeta>& node_meta,
                                                 const std::vector<bool>& served) {
  for (int node : tour.order) {
    if (node < static_cast<int>(served.size()) && served[node]) continue;
    UavTarget t;
    t.point = node_meta[node].p_ps;
    t.speed = tour.v_used;
    t.node = node;
    t.ugv_id = node_meta[node].ugv_id;
    return t;
  }
  return std::nullopt;
}

}  // namespace colag
