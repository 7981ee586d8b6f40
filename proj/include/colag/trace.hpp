#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace colag {

/// Line-delimited JSON event stream. Objects serialize with sorted keys and
/// shortest-round-trip numerals, so equal runs produce identical bytes.
class TraceWriter {
 public:
  TraceWriter() = default;

  explicit TraceWriter(const std::string& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("TraceWriter: cannot open " + path);
    enabled_ = true;
  }

  bool enabled() const { return enabled_; }

  void write(const nlohmann::json& row) {
    if (!enabled_) return;
    out_ << row.dump() << '\n';
    ++rows_;
  }

  void flush() {
    if (enabled_) out_.flush();
  }

  std::uint64_t rows() const { return rows_; }

 private:
  std::ofstream out_;
  bool enabled_ = false;
  std::uint64_t rows_ = 0;
};

/// Per-UGV outcome counters. Times are stored as step counts scaled by dt at
/// report time so trace replay reproduces them exactly.
struct UgvMetrics {
  int id = -1;
  bool reached = false;
  double reach_time = -1.0;     // confirmation time; -1 when not reached
  double waiting_time = 0.0;    // stop-and-wait intervals
  double goal_wait_time = 0.0;  // parked at believed goal awaiting confirmation
  double traj_len = 0.0;        // true path length
  int collisions = 0;
  int overlap_steps = 0;        // steps spent overlapping another UGV
};

struct MetricsReport {
  std::vector<UgvMetrics> ugvs;
  double uav_traj_len = 0.0;
  double sim_time = 0.0;
  int steps = 0;
  std::string status;  // complete | failed | timeout
  int collisions = 0;
  int served_visits = 0;
  int requests_issued = 0;
  int reschedules = 0;
  double v_used_max = 0.0;
  std::uint64_t state_digest = 0;

  double mean_reach() const {
    double s = 0.0;
    for (const auto& u : ugvs) s += u.reached ? u.reach_time : sim_time;
    return ugvs.empty() ? 0.0 : s / ugvs.size();
  }
  double mean_wait() const {
    double s = 0.0;
    for (const auto& u : ugvs) s += u.waiting_time;
    return ugvs.empty() ? 0.0 : s / ugvs.size();
  }
  double max_wait() const {
    double m = 0.0;
    for (const auto& u : ugvs) m = std::max(m, u.waiting_time);
    return m;
  }
  double mean_traj_len() const {
    double s = 0.0;
    for (const auto& u : ugvs) s += u.traj_len;
    return ugvs.empty() ? 0.0 : s / ugvs.size();
  }
};

}  // namespace colag
