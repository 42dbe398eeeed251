#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diffplan/geometry.hpp"
#include "diffplan/trajectory.hpp"

namespace diffplan::sim {

/// Straight-line obstacle track at constant speed. The obstacle stops at its
/// endpoint once `duration` has elapsed.
struct DynamicObstacle {
  Pose start;
  double speed = 0.0;
  double duration = 0.0;
  double length = 0.5;
  double width = 0.28;

  Vec2 position(double t) const;
  ConvexPolygon footprint(double t) const;
  /// Positions at t = 0, dt, ..., (horizon-1) dt.
  ObstacleTrack sample(double dt, int horizon) const;
};

/// Occupancy grid, row-major with row 0 at y = 0.
struct OccupancyGrid {
  int rows = 0;
  int cols = 0;
  double resolution = 0.05;
  std::vector<std::uint8_t> cells;

  bool occupied(int row, int col) const { return cells[static_cast<std::size_t>(row) * cols + col] != 0; }
  void set(int row, int col, bool v) { cells[static_cast<std::size_t>(row) * cols + col] = v ? 1 : 0; }
  bool in_bounds(int row, int col) const { return row >= 0 && col >= 0 && row < rows && col < cols; }
  Vec2 cell_center(int row, int col) const { return {(col + 0.5) * resolution, (row + 0.5) * resolution}; }
  int col_of(double x) const;
  int row_of(double y) const;
};

struct OccupancyRun {
  int row = 0;
  int col = 0;
  int length = 0;
};

struct SceneSpec {
  std::string name = "scene";
  double width = 6.0;
  double height = 6.0;
  double resolution = 0.05;
  std::vector<ConvexPolygon> polygons;
  std::vector<OccupancyRun> grid_runs;
  std::vector<DynamicObstacle> dynamic;
  std::optional<Pose> goal;
  /// xmin, ymin, xmax, ymax for start sampling.
  std::optional<std::array<double, 4>> start_region;
  /// Upper bound on reference-path length for sampled starts; 0 disables.
  double max_path_length = 0.0;
  std::optional<double> mpc_gamma;
  std::optional<double> mpc_alpha;

  void validate() const;

  /// Static obstacle polygons: explicit polygons plus one rectangle per grid run.
  std::vector<ConvexPolygon> static_polygons() const;
  /// Rasterized static geometry (a cell is occupied when it intersects an obstacle).
  OccupancyGrid rasterize() const;

  /// Copy without dynamic obstacles.
  SceneSpec static_only() const;
  /// Copy without static obstacles.
  SceneSpec dynamic_only() const;
};

SceneSpec parse_scene(const std::string& text);
std::string format_scene(const SceneSpec& scene);
SceneSpec load_scene(const std::string& path);
void save_scene(const SceneSpec& scene, const std::string& path);
/// FNV-1a hash of the canonical text form.
std::uint64_t scene_hash(const SceneSpec& scene);

/// Distance queries against a scene's static and dynamic geometry. The map
/// boundary counts as an obstacle.
class CollisionWorld {
 public:
  explicit CollisionWorld(const SceneSpec& scene);

  double static_distance(const ConvexPolygon& body) const;
  double dynamic_distance(const ConvexPolygon& body, double t) const;
  double distance(const ConvexPolygon& body, double t) const;

  const SceneSpec& scene() const { return scene_; }

 private:
  struct Entry {
    ConvexPolygon poly;
    Vec2 lo;
    Vec2 hi;
  };
  SceneSpec scene_;
  std::vector<Entry> statics_;
};

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace diffplan::sim
