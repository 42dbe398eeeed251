#include "diffplan/sampler.hpp"

#include <cmath>

#include "diffplan/error.hpp"

namespace diffplan::diffusion {

void SamplerConfig::validate(int total_steps) const {
  if (kind == SamplerKind::kDdim && (ddim_steps < 1 || ddim_steps > total_steps))
    throw Error(ErrorCode::kConfigValidation, "ddim_steps must lie in [1, T]");
  if (!(dt > 0.0)) throw Error(ErrorCode::kConfigValidation, "sampler dt must be positive");
}

std::mt19937_64 member_stream(std::uint64_t seed, std::size_t index) {
  // splitmix64 of (seed, index) so neighbouring streams are decorrelated.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return std::mt19937_64(z);
}

namespace {

TrajArray gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  TrajArray out(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) out(i, j) = g(rng);
  return out;
}

TrajArray predict_x0(const TrajArray& x, const TrajArray& eps, double ab, bool clip) {
  TrajArray x0 = (x - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
  if (clip) x0 = x0.cwiseMax(-1.0).cwiseMin(1.0);
  return x0;
}

void inpaint(TrajArray& x, const Eigen::Vector4d& s, const Eigen::Vector4d& g, double ab, std::mt19937_64& rng) {
  const Eigen::Index last = x.cols() - 1;
  if (ab >= 1.0) {
    x.col(0) = s;
    x.col(last) = g;
    return;
  }
  std::normal_distribution<double> n(0.0, 1.0);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  for (int i = 0; i < kPoseChannels; ++i) x(i, 0) = a * s(i) + b * n(rng);
  for (int i = 0; i < kPoseChannels; ++i) x(i, last) = a * g(i) + b * n(rng);
}

}  // namespace

TrajArray ddpm_step(const TrajArray& x, const TrajArray& eps, int t, const NoiseSchedule& sched, bool clip,
                    const TrajArray* noise) {
  const auto ti = static_cast<std::size_t>(t);
  const double ab = sched.alpha_bar[ti];
  const double ab_prev = sched.alpha_bar[ti - 1];
  const double beta = sched.beta[ti];
  const TrajArray x0 = predict_x0(x, eps, ab, clip);
  const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
  const double ct = std::sqrt(sched.alpha[ti]) * (1.0 - ab_prev) / (1.0 - ab);
  TrajArray out = c0 * x0 + ct * x;
  if (noise != nullptr && t > 1) out += std::sqrt(sched.beta_tilde[ti]) * *noise;
  return out;
}

TrajArray ddim_step(const TrajArray& x, const TrajArray& eps, int t, int t_prev, const NoiseSchedule& sched,
                    bool clip) {
  const double ab = sched.alpha_bar[static_cast<std::size_t>(t)];
  const double ab_prev = sched.alpha_bar[static_cast<std::size_t>(t_prev)];
  const TrajArray x0 = predict_x0(x, eps, ab, clip);
  const TrajArray e = clip ? TrajArray((x - std::sqrt(ab) * x0) / std::sqrt(1.0 - ab)) : eps;
  return std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * e;
}

SampleResult sample_with(const EpsFn& eps, const NoiseSchedule& sched, const NormStats& norm, int horizon,
                         const Pose& start, const Pose& goal, std::size_t n, const SamplerConfig& cfg,
                         std::uint64_t seed) {
  cfg.validate(sched.steps);
  if (horizon < 2) throw_invalid("sampling needs a horizon of at least 2");
  SampleResult result;
  if (n == 0) return result;

  const Eigen::Vector4d s = norm.normalize_pose(start);
  const Eigen::Vector4d g = norm.normalize_pose(goal);
  std::vector<std::mt19937_64> streams;
  std::vector<TrajArray> x;
  for (std::size_t i = 0; i < n; ++i) {
    streams.push_back(member_stream(seed, i));
    x.push_back(gaussian(streams.back(), kPoseChannels, horizon));
    inpaint(x.back(), s, g, sched.alpha_bar[static_cast<std::size_t>(sched.steps)], streams.back());
  }

  std::vector<int> steps;
  if (cfg.kind == SamplerKind::kDdim) {
    steps = ddim_timesteps(sched.steps, cfg.ddim_steps);
  } else {
    for (int t = sched.steps; t >= 1; --t) steps.push_back(t);
  }
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const int t = steps[k];
    const int t_prev = k + 1 < steps.size() ? steps[k + 1] : 0;
    const std::vector<TrajArray> e = eps(x, t);
    if (e.size() != n) throw Error(ErrorCode::kShapeMismatch, "epsilon source returned a wrong batch size");
    result.eps_evaluations += n;
    for (std::size_t i = 0; i < n; ++i) {
      if (e[i].cols() != horizon) throw Error(ErrorCode::kShapeMismatch, "epsilon source returned a wrong shape");
      if (cfg.kind == SamplerKind::kDdim) {
        x[i] = ddim_step(x[i], e[i], t, t_prev, sched, cfg.clip_denoised);
      } else {
        const TrajArray z = gaussian(streams[i], kPoseChannels, horizon);
        x[i] = ddpm_step(x[i], e[i], t, sched, cfg.clip_denoised, &z);
      }
      inpaint(x[i], s, g, sched.alpha_bar[static_cast<std::size_t>(t_prev)], streams[i]);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    Trajectory traj = Trajectory::from_array(norm.denormalize(x[i]), cfg.dt);
    traj.poses.front() = start;
    traj.poses.back() = goal;
    result.trajectories.push_back(std::move(traj));
  }
  return result;
}

SampleResult sample(const Denoiser& model, const Conditioning& cond, std::size_t n, const SamplerConfig& cfg,
                    std::uint64_t seed) {
  const EpsFn fn = [&](const std::vector<TrajArray>& x, int t) { return model.predict(x, t, cond); };
  return sample_with(fn, model.schedule(), model.norm(), model.horizon(), cond.start, cond.goal, n, cfg, seed);
}

}  // namespace diffplan::diffusion
