#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "diffplan/scene.hpp"
#include "diffplan/trajectory.hpp"

namespace testutil {

using namespace diffplan;

inline sim::SceneSpec empty_scene(double w = 4.0, double h = 4.0) {
  sim::SceneSpec s;
  s.name = "empty";
  s.width = w;
  s.height = h;
  return s;
}

/// L poses along a line from (x0, y0) with the given per-step spacing, padded
/// with the final pose after `moving` steps.
inline Trajectory straight(double x0, double y0, double yaw, double spacing, int length, int moving = -1,
                           double dt = 0.1) {
  if (moving < 0) moving = length - 1;
  Trajectory t;
  t.dt = dt;
  for (int i = 0; i < length; ++i) {
    const int k = std::min(i, moving);
    t.poses.push_back(Pose::from_yaw(x0 + k * spacing * std::cos(yaw), y0 + k * spacing * std::sin(yaw), yaw));
  }
  return t;
}

inline std::string source_path(const std::string& rel) { return std::string(DIFFPLAN_SOURCE_DIR) + "/" + rel; }

}  // namespace testutil
