#pragma once

#include <optional>
#include <vector>

#include "diffplan/mpc.hpp"
#include "diffplan/scene.hpp"
#include "diffplan/trajectory.hpp"
#include "diffplan/vehicle.hpp"

namespace diffplan::sim {

struct PurePursuitConfig {
  double min_lookahead = 0.3;
  double lookahead_gain = 0.5;  // lookahead = max(min_lookahead, gain |v|)
  double control_dt = 0.05;
  /// Extra time after the reference ends, used to settle at the goal.
  double settle_time = 0.0;
};

struct TrackResult {
  /// Executed states at the reference's dt, index k at time k dt.
  std::vector<VehicleState> states;
  /// Signed speed command per reference segment.
  std::vector<double> speed_profile;
  /// Mean position error to the time-aligned reference.
  double mean_error = 0.0;
  bool solver_failed = false;
};

/// Signed segment speeds d/dt; a segment is reverse when its displacement
/// points against the pose heading.
std::vector<double> speed_profile(const Trajectory& traj);

TrackResult pure_pursuit_track(const Trajectory& traj, const VehicleParams& params,
                               const PurePursuitConfig& cfg = {});

/// Receding-horizon tracking with the data-generation MPC; references are the
/// trajectory poses interpolated at the MPC prediction times.
TrackResult mpc_track(const Trajectory& traj, const VehicleParams& params, const datagen::MpcConfig& cfg = {});

double mean_tracking_error(const std::vector<VehicleState>& states, const Trajectory& traj);

struct CollisionCheck {
  bool collided = false;
  std::size_t first_index = 0;
  /// Per-state footprint clearance (dynamic obstacles at k dt).
  std::vector<double> clearance;
};

CollisionCheck collision_during_tracking(const std::vector<VehicleState>& states, double dt,
                                         const CollisionWorld& world, const VehicleParams& params);

}  // namespace diffplan::sim
