#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "diffplan/compose.hpp"
#include "diffplan/safety_filter.hpp"
#include "diffplan/sampler.hpp"

namespace diffplan::planner {

/// Draws n world-unit trajectories between start and goal.
using TrajectorySampler =
    std::function<diffusion::SampleResult(const Pose& start, const Pose& goal, std::size_t n, std::uint64_t seed)>;

TrajectorySampler model_sampler(std::shared_ptr<const diffusion::Denoiser> model,
                                std::optional<ObstacleTrack> obstacle, const diffusion::SamplerConfig& cfg);
TrajectorySampler composed_sampler(compose::CompositionSpec spec, const diffusion::SamplerConfig& cfg);

struct PlannerOptions {
  filter::FilterConfig filter;
  bool use_filter = true;
  VehicleParams vehicle;
};

struct PlanOutcome {
  std::optional<Trajectory> trajectory;
  int batches = 0;
  std::uint64_t eps_evaluations = 0;
  filter::Selection selection;
};

/// Samples N_filter candidates per attempt. With the filter enabled the best
/// valid candidate is returned after at most N_retry attempts; without it the
/// first candidate of a single batch is returned unchecked.
class DiffusionPlanner {
 public:
  DiffusionPlanner(TrajectorySampler sampler, const sim::SceneSpec& scene, PlannerOptions opts);

  PlanOutcome plan(const Pose& start, const Pose& goal, std::uint64_t seed) const;

  const PlannerOptions& options() const { return opts_; }
  const sim::CollisionWorld& world() const { return world_; }

 private:
  TrajectorySampler sampler_;
  sim::CollisionWorld world_;
  PlannerOptions opts_;
};

/// Seed of retry attempt k.
std::uint64_t attempt_seed(std::uint64_t seed, int attempt);

}  // namespace diffplan::planner
