#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "diffplan/scene.hpp"
#include "diffplan/trajectory.hpp"
#include "diffplan/vehicle.hpp"

namespace diffplan::filter {

struct FilterConfig {
  int n_filter = 8;
  int n_retry = 5;
  /// Weights of normalized length, acceleration, steering and the safety term.
  std::array<double, 4> omega{1.0, 1.0, 1.0, 1.0};
  double v_inf = 1e6;
  double dt = 0.1;
  /// Below this speed the steering estimate is set to 0.
  double v_eps = 1e-3;

  void validate() const;
};

struct TrajectoryKinematics {
  std::vector<double> d;      // L-1 segment lengths
  double length = 0.0;        // sum of d
  std::vector<double> v;      // L-1 segment speeds
  std::vector<double> a;      // L-2 accelerations
  std::vector<double> r;      // L-1 yaw rates from wrapped differences
  std::vector<double> delta;  // L-1 steering angles atan(l_w r / v)
};

TrajectoryKinematics trajectory_kinematics(const std::vector<Vec2>& q, const std::vector<double>& phi, double dt,
                                           double wheelbase, double v_eps = 1e-3);

/// (x - min) / (max - min); all zeros when the spread is below 1e-9 relative
/// to max(1, |x|_max).
std::vector<double> minmax_normalize(const std::vector<double>& values);

struct Clearance {
  std::vector<double> per_point;
  double rho = 0.0;
};

/// Footprint distance to static geometry and to dynamic obstacles at the same
/// time index k dt. rho = 0 iff the footprint overlaps something at some index.
Clearance clearance(const Trajectory& traj, const sim::CollisionWorld& world, const VehicleParams& params);

/// 0 when every wrapped |dphi| < w_max dt, else v_inf.
double yaw_continuity(const Trajectory& traj, const FilterConfig& cfg, const VehicleParams& params);

struct CandidateScore {
  double length = 0.0;
  double accel_sq = 0.0;  // squared Euclidean norm of the acceleration series
  double steer_sq = 0.0;  // squared Euclidean norm of the steering series
  double length_norm = 0.0;
  double accel_norm = 0.0;
  double steer_norm = 0.0;
  double rho = 0.0;
  double j_safe = 0.0;
  double yaw_penalty = 0.0;
  double cost = 0.0;  // J_i without the yaw penalty
  bool valid() const { return rho > 0.0 && yaw_penalty == 0.0; }
};

std::vector<CandidateScore> score_batch(const std::vector<Trajectory>& batch, const sim::CollisionWorld& world,
                                        const FilterConfig& cfg, const VehicleParams& params);

/// Index of the candidate with the lowest J_i among those that are collision
/// free and yaw continuous (lowest index on ties); nullopt when none qualifies.
std::optional<std::size_t> best_candidate(const std::vector<CandidateScore>& scores);

struct Selection {
  std::optional<Trajectory> trajectory;
  std::size_t index = 0;
  int batches = 0;
  std::vector<std::vector<CandidateScore>> history;
};

/// Draws a batch for attempt k = 0..n_retry-1.
using BatchSampler = std::function<std::vector<Trajectory>(int attempt)>;

/// Retry loop: score each batch and return the best valid candidate, or an
/// empty selection after n_retry batches without one.
Selection select_trajectory(const BatchSampler& sampler, const sim::CollisionWorld& world, const FilterConfig& cfg,
                            const VehicleParams& params);

/// Per-candidate diagnostics as JSON text (the CLI's --explain output).
std::string explain(const Selection& sel);

}  // namespace diffplan::filter
