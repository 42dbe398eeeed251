#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "diffplan/denoiser.hpp"

namespace diffplan::diffusion {

enum class SamplerKind { kDdpm, kDdim };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::kDdim;
  int ddim_steps = 8;
  /// Clamp the predicted clean trajectory to the normalized range [-1, 1].
  bool clip_denoised = true;
  double dt = 0.1;

  void validate(int total_steps) const;
};

/// Noise prediction for a batch of normalized trajectories at step t.
using EpsFn = std::function<std::vector<TrajArray>(const std::vector<TrajArray>& x, int t)>;

struct SampleResult {
  std::vector<Trajectory> trajectories;
  /// Per-trajectory noise predictions requested from the epsilon source.
  std::uint64_t eps_evaluations = 0;
};

/// Independent random stream of batch member `index` under `seed`.
std::mt19937_64 member_stream(std::uint64_t seed, std::size_t index);

/// Reverse process from pure noise. Columns 0 and L-1 are inpainted with the
/// start and goal after every step (noised to the current level) and equal them
/// exactly in the returned world-unit trajectories.
SampleResult sample_with(const EpsFn& eps, const NoiseSchedule& sched, const NormStats& norm, int horizon,
                         const Pose& start, const Pose& goal, std::size_t n, const SamplerConfig& cfg,
                         std::uint64_t seed);

SampleResult sample(const Denoiser& model, const Conditioning& cond, std::size_t n, const SamplerConfig& cfg,
                    std::uint64_t seed);

/// Single reverse step in normalized space.
TrajArray ddpm_step(const TrajArray& x, const TrajArray& eps, int t, const NoiseSchedule& sched, bool clip,
                    const TrajArray* noise);
TrajArray ddim_step(const TrajArray& x, const TrajArray& eps, int t, int t_prev, const NoiseSchedule& sched,
                    bool clip);

}  // namespace diffplan::diffusion
