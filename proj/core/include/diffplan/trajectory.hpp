#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "diffplan/geometry.hpp"

namespace diffplan {

inline constexpr int kPoseChannels = 4;
inline constexpr int kDefaultHorizon = 128;

/// 4 x L array, one column per waypoint: [x, y, q_z, q_w].
using TrajArray = Eigen::Matrix<double, kPoseChannels, Eigen::Dynamic>;
/// 2 x L array of obstacle positions sampled on the trajectory clock.
using ObstacleTrack = Eigen::Matrix<double, 2, Eigen::Dynamic>;

struct Trajectory {
  std::vector<Pose> poses;
  double dt = 0.1;

  std::size_t size() const { return poses.size(); }

  TrajArray to_array() const;
  /// Builds a trajectory from an array; the quaternion of every pose is normalized.
  static Trajectory from_array(const TrajArray& a, double dt);

  std::vector<Vec2> positions() const;
  std::vector<double> yaws() const;
};

/// Pads with copies of the last pose or truncates to exactly `horizon` poses.
/// Returns the number of real (non-padding) poses kept.
std::size_t fit_to_horizon(std::vector<Pose>& poses, std::size_t horizon);

}  // namespace diffplan
