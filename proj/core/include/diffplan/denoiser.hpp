#pragma once

#include <array>
#include <optional>
#include <vector>

#include "diffplan/datagen.hpp"
#include "diffplan/schedule.hpp"
#include "diffplan/trajectory.hpp"

namespace diffplan::diffusion {

/// Constraint set for one planning query. With cond_mask false the obstacle is
/// ignored and the denoiser produces its unconditional prediction.
struct Conditioning {
  Pose start;
  Pose goal;
  std::optional<ObstacleTrack> obstacle;
  bool cond_mask = true;

  bool uses_obstacle() const { return cond_mask && obstacle.has_value(); }
  Conditioning unconditional() const {
    Conditioning c = *this;
    c.cond_mask = false;
    return c;
  }
};

/// Per-channel min-max scaling of [x, y, q_z, q_w] to [-1, 1].
struct NormStats {
  std::array<double, kPoseChannels> lo{-1.0, -1.0, -1.0, -1.0};
  std::array<double, kPoseChannels> hi{1.0, 1.0, 1.0, 1.0};

  static NormStats identity() { return {}; }
  static NormStats from_dataset(const datagen::Dataset& ds);
  /// Fixed map-frame scaling: x in [0, width], y in [0, height], q_z in [-1, 1],
  /// q_w in [0, 1]. Models composed at test time must share one normalization.
  static NormStats from_bounds(double width, double height);

  double scale(int c) const;
  TrajArray normalize(const TrajArray& a) const;
  TrajArray denormalize(const TrajArray& a) const;
  Eigen::Vector4d normalize_pose(const Pose& p) const;
  /// Obstacle positions share the x and y channel scaling.
  ObstacleTrack normalize_track(const ObstacleTrack& t) const;

  bool operator==(const NormStats&) const = default;
};

/// epsilon-prediction model eps(tau_t, t, C). Inputs and outputs live in the
/// normalized space described by norm(); the conditioning is in world units.
/// Implementations must be deterministic and must treat batch members
/// independently.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual int horizon() const = 0;
  virtual const NoiseSchedule& schedule() const = 0;
  virtual const NormStats& norm() const = 0;
  virtual std::vector<TrajArray> predict(const std::vector<TrajArray>& x, int t, const Conditioning& cond) const = 0;
};

/// Exact posterior-mean noise predictor for Gaussian data N(mean, diag(var)):
/// eps(x, t) = sqrt(1 - ab) (x - sqrt(ab) mean) / (ab var + 1 - ab).
/// The unconditional branch uses its own Gaussian.
class GaussianOracleDenoiser final : public Denoiser {
 public:
  GaussianOracleDenoiser(TrajArray mean, TrajArray var, TrajArray uncond_mean, TrajArray uncond_var,
                         NoiseSchedule sched, NormStats norm = NormStats::identity());

  int horizon() const override { return static_cast<int>(mean_.cols()); }
  const NoiseSchedule& schedule() const override { return sched_; }
  const NormStats& norm() const override { return norm_; }
  std::vector<TrajArray> predict(const std::vector<TrajArray>& x, int t, const Conditioning& cond) const override;

  const TrajArray& mean(bool conditional) const { return conditional ? mean_ : uncond_mean_; }
  const TrajArray& var(bool conditional) const { return conditional ? var_ : uncond_var_; }

 private:
  TrajArray mean_;
  TrajArray var_;
  TrajArray uncond_mean_;
  TrajArray uncond_var_;
  NoiseSchedule sched_;
  NormStats norm_;
};

}  // namespace diffplan::diffusion
