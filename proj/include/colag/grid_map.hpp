#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "colag/geometry.hpp"

namespace colag {

enum class CellState : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell& a, const Cell& b) { return a.x == b.x && a.y == b.y; }
  friend bool operator!=(const Cell& a, const Cell& b) { return !(a == b); }
};

/// Grid geometry without the cell payload, shared by maps, patches, and
/// planners so region arithmetic is done exactly one way.
struct GridLayout {
  double resolution = 0.1;
  Vec2 origin{0.0, 0.0};  // world position of the lower-left corner of cell (0,0)
  int width = 0;
  int height = 0;

  bool in_bounds(int ix, int iy) const {
    return ix >= 0 && iy >= 0 && ix < width && iy < height;
  }
  bool in_bounds(const Cell& c) const { return in_bounds(c.x, c.y); }

  std::size_t flat(int ix, int iy) const {
    return static_cast<std::size_t>(iy) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(ix);
  }
  std::size_t flat(const Cell& c) const { return flat(c.x, c.y); }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  /// Cell containing a world point; points on a cell's upper edge belong to
  /// the next cell (floor convention). Out of bounds -> nullopt.
  std::optional<Cell> world_to_grid(const Vec2& p) const {
    const int ix = static_cast<int>(std::floor((p.x() - origin.x()) / resolution));
    const int iy = static_cast<int>(std::floor((p.y() - origin.y()) / resolution));
    if (!in_bounds(ix, iy)) return std::nullopt;
    return Cell{ix, iy};
  }

  Vec2 cell_center(int ix, int iy) const {
    return origin + Vec2((ix + 0.5) * resolution, (iy + 0.5) * resolution);
  }
  Vec2 cell_center(const Cell& c) const { return cell_center(c.x, c.y); }

  friend bool operator==(const GridLayout& a, const GridLayout& b) {
    return a.resolution == b.resolution && a.origin == b.origin && a.width == b.width &&
           a.height == b.height;
  }
  friend bool operator!=(const GridLayout& a, const GridLayout& b) { return !(a == b); }
};

/// Tri-state occupancy grid, row-major storage.
struct GridMap {
  GridLayout geom;
  std::vector<CellState> cells;

  GridMap() = default;
  GridMap(const GridLayout& g, CellState fill = CellState::Unknown)
      : geom(g), cells(g.cell_count(), fill) {}

  static GridMap make(const Vec2& origin, const Vec2& extent, double resolution,
                      CellState fill = CellState::Unknown) {
    GridLayout g;
    g.resolution = resolution;
    g.origin = origin;
    g.width = static_cast<int>(std::ceil(extent.x() / resolution - 1e-9));
    g.height = static_cast<int>(std::ceil(extent.y() / resolution - 1e-9));
    return GridMap(g, fill);
  }

  CellState at(int ix, int iy) const { return cells[geom.flat(ix, iy)]; }
  CellState at(const Cell& c) const { return at(c.x, c.y); }
  void set(int ix, int iy, CellState s) { cells[geom.flat(ix, iy)] = s; }
  void set(const Cell& c, CellState s) { set(c.x, c.y, s); }
};

/// Visits every cell the segment [from, to] passes through, in order,
/// starting at the cell containing `from`. Traversal stops early if the ray
/// leaves the grid or the visitor returns false. Amanatides-Woo stepping.
template <class Visitor>
inline void traverse_ray(const GridLayout& geom, const Vec2& from, const Vec2& to,
                         Visitor&& visit) {
  const auto start = geom.world_to_grid(from);
  if (!start) return;
  int ix = start->x, iy = start->y;

  const Vec2 d = to - from;
  const double len = d.norm();
  if (len <= 0.0) {
    visit(Cell{ix, iy});
    return;
  }
  const Vec2 dir = d / len;

  const int step_x = dir.x() > 0.0 ? 1 : (dir.x() < 0.0 ? -1 : 0);
  const int step_y = dir.y() > 0.0 ? 1 : (dir.y() < 0.0 ? -1 : 0);

  const double inf = std::numeric_limits<double>::infinity();
  // Distance along the ray to the next vertical / horizontal cell boundary.
  auto boundary_t = [&](double p0, double o, int idx, int step, double dc) {
    if (step == 0) return inf;
    const double edge = o + (idx + (step > 0 ? 1 : 0)) * geom.resolution;
    return (edge - p0) / dc;
  };
  double t_max_x = boundary_t(from.x(), geom.origin.x(), ix, step_x, dir.x());
  double t_max_y = boundary_t(from.y(), geom.origin.y(), iy, step_y, dir.y());
  const double t_delta_x = step_x ? geom.resolution / std::abs(dir.x()) : inf;
  const double t_delta_y = step_y ? geom.resolution / std::abs(dir.y()) : inf;

  while (true) {
    if (!visit(Cell{ix, iy})) return;
    double t_next;
    if (t_max_x < t_max_y) {
      t_next = t_max_x;
      ix += step_x;
      t_max_x += t_delta_x;
    } else {
      t_next = t_max_y;
      iy += step_y;
      t_max_y += t_delta_y;
    }
    if (t_next > len) return;  // segment ends inside the previous cell
    if (!geom.in_bounds(ix, iy)) return;
  }
}

/// All cells touched by the segment, start cell first.
inline std::vector<Cell> ray_cells(const GridLayout& geom, const Vec2& from, const Vec2& to) {
  std::vector<Cell> out;
  traverse_ray(geom, from, to, [&](const Cell& c) {
    out.push_back(c);
    return true;
  });
  return out;
}

}  // namespace colag
