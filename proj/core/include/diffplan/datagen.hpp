#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "diffplan/grid_planner.hpp"
#include "diffplan/mpc.hpp"
#include "diffplan/scene.hpp"
#include "diffplan/trajectory.hpp"

namespace diffplan::datagen {

struct Demonstration {
  Trajectory traj;
  std::optional<ObstacleTrack> obstacle;
  /// Poses before padding (equals the horizon when truncated).
  std::uint32_t real_length = 0;
  bool truncated = false;
};

struct Dataset {
  std::vector<Demonstration> demos;
  double dt = 0.1;
  int horizon = kDefaultHorizon;
  std::string map_id;
  std::uint64_t scene_hash = 0;

  /// Throws kInvalidArgument when any demo disagrees on dt or length.
  void validate() const;
};

struct RolloutOptions {
  double dt = 0.1;
  int horizon = kDefaultHorizon;
  double goal_tolerance = 0.05;
  double stop_speed = 0.05;
  double max_time = 60.0;
  /// Abort when the reference progress stalls this long away from the goal.
  double stall_time = 4.0;
  GridPlannerOptions planner;
};

/// Effective MPC settings for a scene: dynamic scenes switch on the avoidance
/// term, and scene files may override gamma and alpha.
MpcConfig mpc_config_for_scene(const sim::SceneSpec& scene, MpcConfig base);

/// Closed-loop MPC tracking of a reference path from start to goal. Poses are
/// recorded every dt, then padded or truncated to the horizon. Dynamic scenes
/// track a reference planned without static obstacles.
Demonstration rollout_demonstration(const sim::SceneSpec& scene, const Pose& start, const Pose& goal,
                                    const MpcConfig& cfg, const VehicleParams& params = {},
                                    const RolloutOptions& opts = {});

/// Post-hoc check of a demonstration against the scene it was generated in.
/// Static geometry is skipped for dynamic scenes (gamma > 0).
bool demonstration_collision_free(const Demonstration& demo, const sim::SceneSpec& scene, const MpcConfig& cfg,
                                  const VehicleParams& params);

struct BuildFailure {
  std::size_t start_index = 0;
  std::string message;
};

struct BuildResult {
  Dataset dataset;
  std::vector<BuildFailure> failures;
};

/// One demonstration per start; failed or colliding rollouts are reported and
/// excluded. Runs on `jobs` worker threads; output order follows the starts.
BuildResult build_dataset(const sim::SceneSpec& scene, const std::vector<Pose>& starts, const Pose& goal,
                          const MpcConfig& cfg, const VehicleParams& params = {}, const RolloutOptions& opts = {},
                          int jobs = 1);

/// Same, with a scene variant per start (e.g. a shifted dynamic obstacle);
/// map id and scene hash come from `scene`.
BuildResult build_dataset(const sim::SceneSpec& scene, const std::vector<sim::SceneSpec>& variants,
                          const std::vector<Pose>& starts, const Pose& goal, const MpcConfig& cfg,
                          const VehicleParams& params, const RolloutOptions& opts, int jobs);

/// Copies of `scene` whose dynamic obstacles start shifted by uniform offsets in
/// [-jitter, jitter] along x and y.
std::vector<sim::SceneSpec> jitter_dynamic_obstacles(const sim::SceneSpec& scene, std::size_t n, double jitter,
                                                     std::uint64_t seed);

/// Uniform start poses inside the scene's start region with clearance from
/// obstacles and a reference path no longer than max_path_length. The heading
/// of each start follows the initial direction of its reference path.
std::vector<Pose> sample_starts(const sim::SceneSpec& scene, std::size_t n, std::uint64_t seed,
                                const GridPlannerOptions& planner = {}, double clearance = 0.35);

}  // namespace diffplan::datagen
