#include "diffplan/schedule.hpp"

#include <cmath>

#include "diffplan/error.hpp"

namespace diffplan::diffusion {

NoiseSchedule make_schedule(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw_invalid("make_schedule: T must be >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
    throw_invalid("make_schedule: need 0 < beta_min <= beta_max < 1");
  NoiseSchedule s;
  s.steps = steps;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  const auto n = static_cast<std::size_t>(steps) + 1;
  s.beta.assign(n, 0.0);
  s.alpha.assign(n, 1.0);
  s.alpha_bar.assign(n, 1.0);
  s.beta_tilde.assign(n, 0.0);
  for (int t = 1; t <= steps; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
    s.beta[i] = beta_min + frac * (beta_max - beta_min);
    s.alpha[i] = 1.0 - s.beta[i];
    s.alpha_bar[i] = s.alpha_bar[i - 1] * s.alpha[i];
    s.beta_tilde[i] = (1.0 - s.alpha_bar[i - 1]) / (1.0 - s.alpha_bar[i]) * s.beta[i];
  }
  return s;
}

TrajArray q_sample(const TrajArray& tau0, int t, const TrajArray& eps, const NoiseSchedule& sched) {
  if (tau0.cols() != eps.cols()) throw Error(ErrorCode::kShapeMismatch, "q_sample: tau0 and eps shapes differ");
  if (t < 0 || t > sched.steps) throw_invalid("q_sample: step out of range");
  const double ab = sched.alpha_bar[static_cast<std::size_t>(t)];
  return std::sqrt(ab) * tau0 + std::sqrt(1.0 - ab) * eps;
}

std::vector<int> ddim_timesteps(int total_steps, int count) {
  if (count < 1 || count > total_steps) throw_invalid("ddim_timesteps: count must lie in [1, T]");
  std::vector<int> ts;
  ts.reserve(static_cast<std::size_t>(count));
  if (count == 1) return {total_steps};
  for (int i = 0; i < count; ++i) {
    const double v = total_steps - static_cast<double>(i) * (total_steps - 1) / (count - 1);
    ts.push_back(static_cast<int>(std::lround(v)));
  }
  return ts;
}

}  // namespace diffplan::diffusion
