#include "diffplan/planner.hpp"

#include "diffplan/error.hpp"

namespace diffplan::planner {

TrajectorySampler model_sampler(std::shared_ptr<const diffusion::Denoiser> model,
                                std::optional<ObstacleTrack> obstacle, const diffusion::SamplerConfig& cfg) {
  if (model == nullptr) throw_invalid("sampler needs a model");
  return [model = std::move(model), obstacle = std::move(obstacle), cfg](const Pose& start, const Pose& goal,
                                                                         std::size_t n, std::uint64_t seed) {
    diffusion::Conditioning cond;
    cond.start = start;
    cond.goal = goal;
    cond.obstacle = obstacle;
    return diffusion::sample(*model, cond, n, cfg, seed);
  };
}

TrajectorySampler composed_sampler(compose::CompositionSpec spec, const diffusion::SamplerConfig& cfg) {
  spec.validate();
  return [spec = std::move(spec), cfg](const Pose& start, const Pose& goal, std::size_t n, std::uint64_t seed) {
    return compose::compose_sample(spec, start, goal, n, cfg, seed);
  };
}

std::uint64_t attempt_seed(std::uint64_t seed, int attempt) {
  return diffusion::member_stream(seed, static_cast<std::size_t>(attempt))();
}

DiffusionPlanner::DiffusionPlanner(TrajectorySampler sampler, const sim::SceneSpec& scene, PlannerOptions opts)
    : sampler_(std::move(sampler)), world_(scene), opts_(opts) {
  opts_.filter.validate();
}

PlanOutcome DiffusionPlanner::plan(const Pose& start, const Pose& goal, std::uint64_t seed) const {
  PlanOutcome out;
  const auto n = static_cast<std::size_t>(opts_.filter.n_filter);
  if (!opts_.use_filter) {
    diffusion::SampleResult r = sampler_(start, goal, n, attempt_seed(seed, 0));
    out.batches = 1;
    out.eps_evaluations = r.eps_evaluations;
    if (!r.trajectories.empty()) out.trajectory = std::move(r.trajectories.front());
    return out;
  }
  const filter::BatchSampler batches = [&](int attempt) {
    diffusion::SampleResult r = sampler_(start, goal, n, attempt_seed(seed, attempt));
    out.eps_evaluations += r.eps_evaluations;
    return std::move(r.trajectories);
  };
  out.selection = filter::select_trajectory(batches, world_, opts_.filter, opts_.vehicle);
  out.batches = out.selection.batches;
  out.trajectory = out.selection.trajectory;
  return out;
}

}  // namespace diffplan::planner
