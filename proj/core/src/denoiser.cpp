#include "diffplan/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "diffplan/error.hpp"

namespace diffplan::diffusion {

NormStats NormStats::from_dataset(const datagen::Dataset& ds) {
  if (ds.demos.empty()) throw_invalid("normalization needs a non-empty dataset");
  NormStats n;
  n.lo.fill(std::numeric_limits<double>::infinity());
  n.hi.fill(-std::numeric_limits<double>::infinity());
  for (const datagen::Demonstration& d : ds.demos) {
    for (const Pose& p : d.traj.poses) {
      const std::array<double, 4> v{p.x, p.y, p.qz, p.qw};
      for (int c = 0; c < kPoseChannels; ++c) {
        n.lo[c] = std::min(n.lo[c], v[c]);
        n.hi[c] = std::max(n.hi[c], v[c]);
      }
    }
  }
  return n;
}

NormStats NormStats::from_bounds(double width, double height) {
  if (!(width > 0.0 && height > 0.0)) throw_invalid("normalization bounds must be positive");
  NormStats n;
  n.lo = {0.0, 0.0, -1.0, 0.0};
  n.hi = {width, height, 1.0, 1.0};
  return n;
}

double NormStats::scale(int c) const {
  const double span = hi[c] - lo[c];
  return span > 0.0 ? 2.0 / span : 1.0;
}

TrajArray NormStats::normalize(const TrajArray& a) const {
  TrajArray out(a.rows(), a.cols());
  for (int c = 0; c < kPoseChannels; ++c) {
    out.row(c) = ((a.row(c).array() - lo[c]) * scale(c) - 1.0).matrix();
  }
  return out;
}

TrajArray NormStats::denormalize(const TrajArray& a) const {
  TrajArray out(a.rows(), a.cols());
  for (int c = 0; c < kPoseChannels; ++c) {
    out.row(c) = ((a.row(c).array() + 1.0) / scale(c) + lo[c]).matrix();
  }
  return out;
}

Eigen::Vector4d NormStats::normalize_pose(const Pose& p) const {
  const std::array<double, 4> v{p.x, p.y, p.qz, p.qw};
  Eigen::Vector4d out;
  for (int c = 0; c < kPoseChannels; ++c) out(c) = (v[c] - lo[c]) * scale(c) - 1.0;
  return out;
}

ObstacleTrack NormStats::normalize_track(const ObstacleTrack& t) const {
  ObstacleTrack out(2, t.cols());
  for (int c = 0; c < 2; ++c) out.row(c) = ((t.row(c).array() - lo[c]) * scale(c) - 1.0).matrix();
  return out;
}

GaussianOracleDenoiser::GaussianOracleDenoiser(TrajArray mean, TrajArray var, TrajArray uncond_mean,
                                               TrajArray uncond_var, NoiseSchedule sched, NormStats norm)
    : mean_(std::move(mean)),
      var_(std::move(var)),
      uncond_mean_(std::move(uncond_mean)),
      uncond_var_(std::move(uncond_var)),
      sched_(std::move(sched)),
      norm_(norm) {
  if (var_.cols() != mean_.cols() || uncond_mean_.cols() != mean_.cols() || uncond_var_.cols() != mean_.cols())
    throw Error(ErrorCode::kShapeMismatch, "Gaussian oracle: mean and variance shapes differ");
  if ((var_.array() < 0.0).any() || (uncond_var_.array() < 0.0).any())
    throw_invalid("Gaussian oracle: variances must be non-negative");
}

std::vector<TrajArray> GaussianOracleDenoiser::predict(const std::vector<TrajArray>& x, int t,
                                                       const Conditioning& cond) const {
  const double ab = sched_.alpha_bar.at(static_cast<std::size_t>(t));
  const TrajArray& mu = cond.cond_mask ? mean_ : uncond_mean_;
  const TrajArray& var = cond.cond_mask ? var_ : uncond_var_;
  const auto denom = (ab * var.array() + (1.0 - ab));
  std::vector<TrajArray> out;
  out.reserve(x.size());
  for (const TrajArray& xi : x) {
    if (xi.cols() != mu.cols()) throw Error(ErrorCode::kShapeMismatch, "Gaussian oracle: input shape mismatch");
    out.push_back((std::sqrt(1.0 - ab) * (xi.array() - std::sqrt(ab) * mu.array()) / denom).matrix());
  }
  return out;
}

}  // namespace diffplan::diffusion
