#pragma once

#include <vector>

#include "diffplan/geometry.hpp"
#include "diffplan/scene.hpp"

namespace diffplan::datagen {

/// Arc-length parameterized reference [x, y, phi](s), stored densely and
/// linearly interpolated.
class ReferencePath {
 public:
  struct Sample {
    double x;
    double y;
    double phi;
  };

  ReferencePath() = default;
  /// Builds from a polyline; headings follow segment directions.
  /// Consecutive duplicate points are dropped. Requires at least two distinct points.
  static ReferencePath from_polyline(const std::vector<Vec2>& points);
  /// Degenerate path that holds a single pose.
  static ReferencePath stationary(const Pose& pose);

  double total_length() const { return s_.empty() ? 0.0 : s_.back(); }
  Sample at(double s) const;
  /// Arc length of the closest point within [s_hint - back, s_hint + ahead].
  double project(Vec2 p, double s_hint, double back, double ahead) const;

  const std::vector<double>& arc_lengths() const { return s_; }
  const std::vector<Vec2>& points() const { return pts_; }
  const std::vector<double>& headings() const { return phi_; }

 private:
  std::vector<double> s_;
  std::vector<Vec2> pts_;
  std::vector<double> phi_;
};

struct GridPlannerOptions {
  /// Obstacle inflation; the vehicle is treated as a disk of this radius.
  double inflation = 0.3;
  /// Length of the straight final approach along the goal heading.
  double approach = 0.6;
  double max_spacing = 0.05;
  int smoothing_passes = 20;
};

/// Grid with every cell closer than `radius` to an obstacle or the map edge marked occupied.
sim::OccupancyGrid inflate(const sim::OccupancyGrid& grid, double radius, double width, double height);

/// True when the straight segment stays in free cells of the grid.
bool line_of_sight(const sim::OccupancyGrid& grid, Vec2 a, Vec2 b);

/// 8-connected A* on a grid; returns cell-center waypoints from start to goal.
/// Throws kNoPath when either end is blocked or the two are disconnected.
std::vector<Vec2> grid_search(const sim::OccupancyGrid& grid, Vec2 start, Vec2 goal);

/// Collision-free reference path on the inflated grid: grid search, shortcut
/// smoothing, densification and heading assignment. When the goal pose has a
/// heading, the path ends with a straight approach along it.
ReferencePath generate_reference_path(const sim::SceneSpec& scene, const Pose& start, const Pose& goal,
                                      const GridPlannerOptions& opts = {});

}  // namespace diffplan::datagen
