#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "diffplan/datagen.hpp"
#include "diffplan/network.hpp"

namespace diffplan::diffusion {

struct TrainConfig {
  int diffusion_steps = kDefaultDiffusionSteps;
  double beta_min = kDefaultBetaMin;
  double beta_max = kDefaultBetaMax;
  NetConfig net;
  int iterations = 4000;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double grad_clip = 1.0;
  double ema_decay = 0.995;
  double p_uncond = 0.1;
  int log_every = 100;
  /// Overrides the dataset min-max normalization when set.
  std::optional<NormStats> norm;

  void validate() const;
  /// Canonical JSON text; its FNV-1a hash is stored in checkpoints.
  std::string canonical_json() const;
  std::uint64_t hash() const;
};

/// One training minibatch: random demos, steps t in 1..T, Gaussian noise, and
/// obstacle dropout with probability p_uncond.
template <typename S>
struct TrainBatch {
  NetInputs<S> inputs;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> eps;
};

template <typename S>
TrainBatch<S> draw_batch(const datagen::Dataset& ds, const NormStats& norm, const NoiseSchedule& sched,
                         int batch_size, double p_uncond, std::mt19937_64& rng);

/// Conditioning of a demonstration: its first and last poses plus the obstacle track.
Conditioning demo_conditioning(const datagen::Demonstration& demo);

struct TrainProgress {
  int iteration = 0;
  double loss = 0.0;
};

struct TrainResult {
  LearnedDenoiser model;  // EMA weights
  std::vector<TrainProgress> curve;
  std::uint64_t config_hash = 0;
};

/// Adam with global-norm clipping and an exponential moving average of the
/// weights. Deterministic for a fixed seed. Throws kTrainingDiverged on a
/// non-finite loss.
TrainResult train(const datagen::Dataset& ds, const TrainConfig& cfg, std::uint64_t seed,
                  const std::function<void(const TrainProgress&)>& on_log = {});

}  // namespace diffplan::diffusion
