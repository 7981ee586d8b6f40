#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "colag/grid_map.hpp"
#include "colag/sensors.hpp"

namespace colag {

// Two readings of the same tri-state map. Planning treats unexplored space as
// drivable so routes exist before coverage; collision checking treats it as
// blocked so motion never outruns knowledge.
enum class TraversalView : std::uint8_t { Planning, Collision };

inline bool cell_blocked(CellState s, TraversalView view) {
  if (s == CellState::Occupied) return true;
  return s == CellState::Unknown && view == TraversalView::Collision;
}

/// Ray-carves a scan into the map: cells along each beam become Free, the
/// terminal cell of a hitting beam becomes Occupied. Occupied never reverts
/// to Free, and no cell returns to Unknown. `on_change(cell, old, new)` fires
/// for every actual state change.
template <class OnChange>
inline void integrate_scan(GridMap& map, const LidarScan& scan, OnChange&& on_change) {
  const auto origin_cell = map.geom.world_to_grid(scan.origin);
  if (!origin_cell) throw std::invalid_argument("integrate_scan: scan origin off the map");

  auto write = [&](const Cell& c, CellState s) {
    const CellState old = map.at(c);
    if (old == s) return;
    if (old == CellState::Occupied && s == CellState::Free) return;
    map.set(c, s);
    on_change(c, old, s);
  };

  for (const auto& beam : scan.beams) {
    const Vec2 dir(std::cos(beam.azimuth), std::sin(beam.azimuth));
    const Vec2 end = scan.origin + beam.range * dir;
    const auto end_cell = map.geom.world_to_grid(end);
    traverse_ray(map.geom, scan.origin, end, [&](const Cell& c) {
      if (beam.hit && end_cell && c == *end_cell) {
        write(c, CellState::Occupied);
        return false;
      }
      write(c, CellState::Free);
      return true;
    });
  }
}

inline void integrate_scan(GridMap& map, const LidarScan& scan) {
  integrate_scan(map, scan, [](const Cell&, CellState, CellState) {});
}

/// Snapshot of a square map region for transmission. Cells not listed in
/// either address array are Free; addresses are flat indices into the full
/// grid, sorted ascending.
struct MapPatch {
  GridLayout geom;         // geometry of the *source* grid, for the merge check
  int x0 = 0, y0 = 0;      // inclusive cell rectangle of the region
  int x1 = -1, y1 = -1;
  Vec2 center{0.0, 0.0};
  double half_extent = 0.0;
  double stamp = 0.0;
  std::vector<std::int32_t> occupied;
  std::vector<std::int32_t> unknown;
};

/// Encodes the cells whose centers lie within the closed square
/// [center - h, center + h]. Throws if the region misses the grid entirely.
inline MapPatch encode_map_patch(const GridMap& map, const Vec2& center, double half_extent,
                                 double stamp = 0.0) {
  if (half_extent <= 0.0) throw std::invalid_argument("encode_map_patch: bad half extent");
  const auto& g = map.geom;
  auto lo_cell = [&](double w, double o) {
    return static_cast<int>(std::ceil((w - o) / g.resolution - 0.5 - 1e-9));
  };
  auto hi_cell = [&](double w, double o) {
    return static_cast<int>(std::floor((w - o) / g.resolution - 0.5 + 1e-9));
  };
  MapPatch p;
  p.geom = g;
  p.center = center;
  p.half_extent = half_extent;
  p.stamp = stamp;
  p.x0 = std::max(0, lo_cell(center.x() - half_extent, g.origin.x()));
  p.x1 = std::min(g.width - 1, hi_cell(center.x() + half_extent, g.origin.x()));
  p.y0 = std::max(0, lo_cell(center.y() - half_extent, g.origin.y()));
  p.y1 = std::min(g.height - 1, hi_cell(center.y() + half_extent, g.origin.y()));
  if (p.x0 > p.x1 || p.y0 > p.y1)
    throw std::invalid_argument("encode_map_patch: region disjoint from grid");

  for (int iy = p.y0; iy <= p.y1; ++iy)
    for (int ix = p.x0; ix <= p.x1; ++ix) {
      const CellState s = map.at(ix, iy);
      if (s == CellState::Occupied)
        p.occupied.push_back(static_cast<std::int32_t>(g.flat(ix, iy)));
      else if (s == CellState::Unknown)
        p.unknown.push_back(static_cast<std::int32_t>(g.flat(ix, iy)));
    }
  return p;
}

/// Overwrites the patch rectangle with the sender's view. The receiver's grid
/// must share the sender's geometry exactly.
template <class OnChange>
inline void merge_map_patch(GridMap& map, const MapPatch& patch, OnChange&& on_change) {
  if (map.geom != patch.geom)
    throw std::invalid_argument("merge_map_patch: grid geometry mismatch");

  auto write = [&](int ix, int iy, CellState s) {
    const CellState old = map.at(ix, iy);
    if (old == s) return;
    map.set(ix, iy, s);
    on_change(Cell{ix, iy}, old, s);
  };

  std::size_t io = 0, iu = 0;
  for (int iy = patch.y0; iy <= patch.y1; ++iy)
    for (int ix = patch.x0; ix <= patch.x1; ++ix) {
      const auto f = static_cast<std::int32_t>(map.geom.flat(ix, iy));
      CellState s = CellState::Free;
      while (io < patch.occupied.size() && patch.occupied[io] < f) ++io;
      while (iu < patch.unknown.size() && patch.unknown[iu] < f) ++iu;
      if (io < patch.occupied.size() && patch.occupied[io] == f)
        s = CellState::Occupied;
      else if (iu < patch.unknown.size() && patch.unknown[iu] == f)
        s = CellState::Unknown;
      write(ix, iy, s);
    }
}

inline void merge_map_patch(GridMap& map, const MapPatch& patch) {
  merge_map_patch(map, patch, [](const Cell&, CellState, CellState) {});
}

/// Offsets of all cells whose centers lie within `radius` of a center cell.
inline std::vector<Cell> disk_offsets(double radius, double resolution) {
  const int r = static_cast<int>(std::floor(radius / resolution + 1e-9));
  std::vector<Cell> out;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (std::hypot(dx * resolution, dy * resolution) <= radius + 1e-12)
        out.push_back(Cell{dx, dy});
  return out;
}

/// A cell is traversable under a view iff no blocked cell (for that view)
/// has its center within `inflation` of this cell's center. Queries outside
/// the grid are an error.
inline bool is_traversable(const GridMap& map, const Cell& c, TraversalView view,
                           double inflation) {
  if (!map.geom.in_bounds(c)) throw std::out_of_range("is_traversable: cell out of bounds");
  const int r = static_cast<int>(std::floor(inflation / map.geom.resolution + 1e-9));
  const double lim = inflation + 1e-12;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const int nx = c.x + dx, ny = c.y + dy;
      if (!map.geom.in_bounds(nx, ny)) continue;
      if (std::hypot(dx * map.geom.resolution, dy * map.geom.resolution) > lim) continue;
      if (cell_blocked(map.at(nx, ny), view)) return false;
    }
  return true;
}

/// Incrementally maintained inflated blockage for one view: per cell, the
/// count of blocked cells within the inflation radius. Kept in sync with the
/// source map through apply_change, so traversability queries are O(1).
class InflationField {
 public:
  InflationField() = default;
  InflationField(const GridLayout& geom, TraversalView view, double inflation)
      : geom_(geom),
        view_(view),
        offsets_(disk_offsets(inflation, geom.resolution)),
        counts_(geom.cell_count(), 0) {}

  TraversalView view() const { return view_; }

  void rebuild(const GridMap& map) {
    if (map.geom != geom_) throw std::invalid_argument("InflationField: geometry mismatch");
    std::fill(counts_.begin(), counts_.end(), 0);
    for (int iy = 0; iy < geom_.height; ++iy)
      for (int ix = 0; ix < geom_.width; ++ix)
        if (cell_blocked(map.at(ix, iy), view_)) splat(ix, iy, +1);
  }

  /// Mirror of a map cell transition.
  void apply_change(const Cell& c, CellState old_state, CellState new_state) {
    const bool was = cell_blocked(old_state, view_);
    const bool now = cell_blocked(new_state, view_);
    if (was == now) return;
    splat(c.x, c.y, now ? +1 : -1);
  }

  bool blocked(int ix, int iy) const { return counts_[geom_.flat(ix, iy)] != 0; }
  bool blocked(const Cell& c) const { return blocked(c.x, c.y); }
  bool traversable(const Cell& c) const { return !blocked(c); }
  const GridLayout& geom() const { return geom_; }

 private:
  void splat(int ix, int iy, int delta) {
    for (const auto& o : offsets_) {
      const int nx = ix + o.x, ny = iy + o.y;
      if (!geom_.in_bounds(nx, ny)) continue;
      counts_[geom_.flat(nx, ny)] = static_cast<std::uint16_t>(
          static_cast<int>(counts_[geom_.flat(nx, ny)]) + delta);
    }
  }

  GridLayout geom_;
  TraversalView view_ = TraversalView::Planning;
  std::vector<Cell> offsets_;
  std::vector<std::uint16_t> counts_;
};

}  // namespace colag
