#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "diffplan/scene.hpp"
#include "diffplan/tracking.hpp"
#include "diffplan/trajectory.hpp"

namespace diffplan::sim {

inline constexpr double kDangerThreshold = 0.08;
inline constexpr double kFailureDeadline = 30.0;

struct Stats {
  double max = 0.0;
  double min = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

Stats summarize(const std::vector<double>& values);

struct RunRecord {
  std::size_t start_index = 0;
  Pose start;
  bool failed = false;
  bool collided = false;
  std::size_t collision_index = 0;
  double plan_time = 0.0;
  double tracking_error = 0.0;
  /// Executed points with clearance below the danger threshold, and their total.
  std::size_t danger_points = 0;
  std::size_t total_points = 0;
  double min_clearance = 0.0;
  int batches = 0;
  std::uint64_t eps_evaluations = 0;
  std::optional<Trajectory> plan;
  std::vector<VehicleState> executed;
};

struct EvalReport {
  std::string planner;
  std::string scene;
  std::size_t runs_total = 0;
  std::size_t failures = 0;    // N_f
  std::size_t collisions = 0;  // N_c, among non-failed runs
  double f_rate = 0.0;
  double c_rate = 0.0;
  double danger = 0.0;
  Stats plan_time;
  Stats tracking_error;
  Stats min_clearance;
  std::optional<std::string> baseline;
  std::optional<double> m_rp;
  std::vector<RunRecord> runs;
};

/// Aggregates run records: F.Rate = N_f / N, C.Rate = (N_f + N_c) / N,
/// Danger = danger points / executed points over non-failed runs. C.T and
/// M.TE statistics cover non-failed runs.
EvalReport aggregate(std::vector<RunRecord> runs, const std::string& planner_name, const std::string& scene_name);

/// (C.T_baseline - C.T) / C.T_baseline on mean planning times.
double relative_reduction(double baseline_mean, double candidate_mean);

struct PlanAttempt {
  std::optional<Trajectory> trajectory;
  int batches = 0;
  std::uint64_t eps_evaluations = 0;
};

using PlannerFn = std::function<PlanAttempt(const Pose& start, std::size_t run_index)>;

enum class Tracker { kPurePursuit, kMpc };

struct EvalConfig {
  Tracker tracker = Tracker::kPurePursuit;
  double deadline = kFailureDeadline;
  double danger_threshold = kDangerThreshold;
  VehicleParams vehicle;
  PurePursuitConfig pure_pursuit;
  datagen::MpcConfig mpc;
  bool keep_trajectories = true;
};

/// Times each planner call, counts empty or late results as failures, tracks
/// the plan and records collisions, tracking error and danger points.
EvalReport evaluate(const PlannerFn& planner, const SceneSpec& scene, const std::vector<Pose>& starts,
                    const EvalConfig& cfg, const std::string& planner_name = "planner");

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

}  // namespace diffplan::sim
