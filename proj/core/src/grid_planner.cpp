#include "diffplan/grid_planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "diffplan/error.hpp"

namespace diffplan::datagen {

ReferencePath ReferencePath::from_polyline(const std::vector<Vec2>& points) {
  ReferencePath path;
  for (const Vec2& p : points) {
    if (!path.pts_.empty() && (p - path.pts_.back()).norm() < 1e-12) continue;
    path.pts_.push_back(p);
  }
  if (path.pts_.size() < 2) throw_invalid("reference path needs at least two distinct points");
  const std::size_t n = path.pts_.size();
  path.s_.resize(n);
  path.s_[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) path.s_[i] = path.s_[i - 1] + (path.pts_[i] - path.pts_[i - 1]).norm();
  path.phi_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = path.pts_[i == 0 ? 0 : i - 1];
    const Vec2 b = path.pts_[i + 1 == n ? n - 1 : i + 1];
    path.phi_[i] = std::atan2(b.y - a.y, b.x - a.x);
  }
  return path;
}

ReferencePath ReferencePath::stationary(const Pose& pose) {
  ReferencePath path;
  path.pts_ = {pose.position()};
  path.s_ = {0.0};
  path.phi_ = {pose.yaw()};
  return path;
}

ReferencePath::Sample ReferencePath::at(double s) const {
  if (s_.empty()) throw_invalid("empty reference path");
  if (s <= 0.0 || s_.size() == 1) return {pts_.front().x, pts_.front().y, phi_.front()};
  if (s >= s_.back()) return {pts_.back().x, pts_.back().y, phi_.back()};
  const auto it = std::upper_bound(s_.begin(), s_.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - s_.begin()) - 1;
  const double w = (s - s_[i]) / (s_[i + 1] - s_[i]);
  const Vec2 p = pts_[i] + (pts_[i + 1] - pts_[i]) * w;
  const double phi = wrap_angle(phi_[i] + w * wrap_angle(phi_[i + 1] - phi_[i]));
  return {p.x, p.y, phi};
}

double ReferencePath::project(Vec2 p, double s_hint, double back, double ahead) const {
  if (s_.size() < 2) return 0.0;
  const double lo = s_hint - back;
  const double hi = s_hint + ahead;
  std::size_t i0 = static_cast<std::size_t>(std::lower_bound(s_.begin(), s_.end(), lo) - s_.begin());
  if (i0 > 0) --i0;
  double best_d = std::numeric_limits<double>::infinity();
  double best_s = std::clamp(s_hint, 0.0, total_length());
  for (std::size_t i = i0; i + 1 < s_.size() && s_[i] <= hi; ++i) {
    const Vec2 a = pts_[i];
    const Vec2 ab = pts_[i + 1] - a;
    const double len2 = ab.dot(ab);
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    const double d = (p - (a + ab * t)).norm();
    if (d < best_d) {
      best_d = d;
      best_s = s_[i] + t * (s_[i + 1] - s_[i]);
    }
  }
  return best_s;
}

sim::OccupancyGrid inflate(const sim::OccupancyGrid& grid, double radius, double width, double height) {
  sim::OccupancyGrid out = grid;
  const double res = grid.resolution;
  const int reach = static_cast<int>(std::ceil(radius / res)) + 1;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const Vec2 p = grid.cell_center(r, c);
      if (p.x < radius || p.y < radius || width - p.x < radius || height - p.y < radius) {
        out.set(r, c, true);
        continue;
      }
      if (grid.occupied(r, c)) continue;
      bool blocked = false;
      for (int dr = -reach; dr <= reach && !blocked; ++dr) {
        for (int dc = -reach; dc <= reach && !blocked; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (!grid.in_bounds(rr, cc) || !grid.occupied(rr, cc)) continue;
          const double dx = std::max(0.0, std::abs(dc) * res - 0.5 * res);
          const double dy = std::max(0.0, std::abs(dr) * res - 0.5 * res);
          if (std::hypot(dx, dy) < radius) blocked = true;
        }
      }
      if (blocked) out.set(r, c, true);
    }
  }
  return out;
}

namespace {

bool free_at(const sim::OccupancyGrid& grid, Vec2 p) {
  const int r = grid.row_of(p.y);
  const int c = grid.col_of(p.x);
  return grid.in_bounds(r, c) && !grid.occupied(r, c);
}

}  // namespace

bool line_of_sight(const sim::OccupancyGrid& grid, Vec2 a, Vec2 b) {
  const double len = (b - a).norm();
  const int steps = std::max(1, static_cast<int>(std::ceil(len / (0.25 * grid.resolution))));
  for (int i = 0; i <= steps; ++i) {
    if (!free_at(grid, a + (b - a) * (static_cast<double>(i) / steps))) return false;
  }
  return true;
}

std::vector<Vec2> grid_search(const sim::OccupancyGrid& grid, Vec2 start, Vec2 goal) {
  const int sr = grid.row_of(start.y);
  const int sc = grid.col_of(start.x);
  const int gr = grid.row_of(goal.y);
  const int gc = grid.col_of(goal.x);
  if (!grid.in_bounds(sr, sc) || grid.occupied(sr, sc)) throw Error(ErrorCode::kNoPath, "start is not in free space");
  if (!grid.in_bounds(gr, gc) || grid.occupied(gr, gc)) throw Error(ErrorCode::kNoPath, "goal is not in free space");

  const std::size_t n = static_cast<std::size_t>(grid.rows) * grid.cols;
  const auto idx = [&](int r, int c) { return static_cast<std::size_t>(r) * grid.cols + c; };
  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);
  const auto h = [&](int r, int c) {
    const double dr = std::abs(r - gr);
    const double dc = std::abs(c - gc);
    return (dr + dc) + (std::sqrt(2.0) - 2.0) * std::min(dr, dc);
  };
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  g[idx(sr, sc)] = 0.0;
  open.emplace(h(sr, sc), idx(sr, sc));
  const std::size_t target = idx(gr, gc);
  while (!open.empty()) {
    const auto [f, cur] = open.top();
    open.pop();
    if (closed[cur]) continue;
    closed[cur] = 1;
    if (cur == target) break;
    const int r = static_cast<int>(cur / grid.cols);
    const int c = static_cast<int>(cur % grid.cols);
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const int rr = r + dr;
        const int cc = c + dc;
        if (!grid.in_bounds(rr, cc) || grid.occupied(rr, cc)) continue;
        // No corner cutting on diagonal moves.
        if (dr != 0 && dc != 0 && (grid.occupied(r, cc) || grid.occupied(rr, c))) continue;
        const std::size_t nb = idx(rr, cc);
        const double cand = g[cur] + ((dr != 0 && dc != 0) ? std::sqrt(2.0) : 1.0);
        if (cand < g[nb]) {
          g[nb] = cand;
          parent[nb] = static_cast<std::int64_t>(cur);
          open.emplace(cand + h(rr, cc), nb);
        }
      }
    }
  }
  if (!closed[target]) throw Error(ErrorCode::kNoPath, "start and goal are disconnected");
  std::vector<Vec2> cells;
  for (std::int64_t cur = static_cast<std::int64_t>(target); cur >= 0; cur = parent[static_cast<std::size_t>(cur)]) {
    const auto u = static_cast<std::size_t>(cur);
    cells.push_back(grid.cell_center(static_cast<int>(u / grid.cols), static_cast<int>(u % grid.cols)));
  }
  std::reverse(cells.begin(), cells.end());
  return cells;
}

namespace {

std::vector<Vec2> shortcut(const sim::OccupancyGrid& grid, const std::vector<Vec2>& pts) {
  std::vector<Vec2> out{pts.front()};
  std::size_t i = 0;
  while (i + 1 < pts.size()) {
    std::size_t j = pts.size() - 1;
    while (j > i + 1 && !line_of_sight(grid, pts[i], pts[j])) --j;
    out.push_back(pts[j]);
    i = j;
  }
  return out;
}

std::vector<Vec2> densify(const std::vector<Vec2>& pts, double spacing) {
  std::vector<Vec2> out{pts.front()};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Vec2 a = pts[i - 1];
    const Vec2 b = pts[i];
    const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / spacing)));
    for (int k = 1; k <= n; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / n));
  }
  return out;
}

}  // namespace

ReferencePath generate_reference_path(const sim::SceneSpec& scene, const Pose& start, const Pose& goal,
                                      const GridPlannerOptions& opts) {
  const sim::OccupancyGrid grid = inflate(scene.rasterize(), opts.inflation, scene.width, scene.height);
  const Vec2 s = start.position();
  const Vec2 g = goal.position();
  const double yaw = goal.yaw();
  const Vec2 dir{std::cos(yaw), std::sin(yaw)};
  const Vec2 pre = g - dir * opts.approach;
  const bool use_approach = opts.approach > 0.0 && (g - s).dot(dir) > opts.approach && free_at(grid, pre) &&
                            line_of_sight(grid, pre, g);
  const Vec2 target = use_approach ? pre : g;

  std::vector<Vec2> way = grid_search(grid, s, target);
  way.front() = s;
  way.back() = target;
  if (way.size() == 1) way.push_back(target);
  way = shortcut(grid, way);
  if (use_approach) way.push_back(g);

  std::vector<Vec2> dense = densify(way, opts.max_spacing);
  // Everything from the approach start onwards stays straight.
  std::size_t fixed_from = dense.size() - 1;
  if (use_approach) {
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if ((dense[i] - pre).norm() < 1e-9) {
        fixed_from = i;
        break;
      }
    }
  }
  std::vector<Vec2> smooth = dense;
  for (int pass = 0; pass < opts.smoothing_passes; ++pass) {
    std::vector<Vec2> next = smooth;
    for (std::size_t i = 1; i < fixed_from && i + 1 < smooth.size(); ++i) {
      next[i] = (smooth[i - 1] + smooth[i] * 2.0 + smooth[i + 1]) * 0.25;
    }
    smooth.swap(next);
  }
  bool ok = true;
  for (std::size_t i = 1; i < smooth.size() && ok; ++i) ok = line_of_sight(grid, smooth[i - 1], smooth[i]);
  return ReferencePath::from_polyline(ok ? smooth : dense);
}

}  // namespace diffplan::datagen
