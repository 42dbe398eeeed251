#pragma once

#include <vector>

#include "diffplan/trajectory.hpp"

namespace diffplan::diffusion {

/// Variance schedule indexed by step t = 0..T. Index 0 is the no-noise
/// boundary: beta[0] = 0 and alpha_bar[0] = 1.
struct NoiseSchedule {
  int steps = 0;  // T
  double beta_min = 0.0;
  double beta_max = 0.0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  /// Posterior variance (1 - alpha_bar[t-1]) / (1 - alpha_bar[t]) * beta[t].
  std::vector<double> beta_tilde;
};

inline constexpr int kDefaultDiffusionSteps = 100;
/// Linear ramp scaled for a 100-step chain so that alpha_bar[T] is close to 0.
inline constexpr double kDefaultBetaMin = 1e-3;
inline constexpr double kDefaultBetaMax = 0.2;

/// Linear beta ramp from beta_min (t = 1) to beta_max (t = T).
NoiseSchedule make_schedule(int steps = kDefaultDiffusionSteps, double beta_min = kDefaultBetaMin,
                            double beta_max = kDefaultBetaMax);

/// tau_t = sqrt(alpha_bar[t]) tau0 + sqrt(1 - alpha_bar[t]) eps, 0 <= t <= T.
TrajArray q_sample(const TrajArray& tau0, int t, const TrajArray& eps, const NoiseSchedule& sched);

/// Evenly spaced descending sub-schedule of `count` steps from T down to 1
/// (just T when count is 1).
std::vector<int> ddim_timesteps(int total_steps, int count);

}  // namespace diffplan::diffusion
