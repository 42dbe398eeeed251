#include "diffplan/trajectory.hpp"

#include "diffplan/error.hpp"

namespace diffplan {

TrajArray Trajectory::to_array() const {
  TrajArray a(kPoseChannels, static_cast<Eigen::Index>(poses.size()));
  for (std::size_t j = 0; j < poses.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    a(0, c) = poses[j].x;
    a(1, c) = poses[j].y;
    a(2, c) = poses[j].qz;
    a(3, c) = poses[j].qw;
  }
  return a;
}

Trajectory Trajectory::from_array(const TrajArray& a, double dt) {
  Trajectory t;
  t.dt = dt;
  t.poses.reserve(static_cast<std::size_t>(a.cols()));
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    t.poses.push_back(Pose{a(0, c), a(1, c), a(2, c), a(3, c)}.normalized());
  }
  return t;
}

std::vector<Vec2> Trajectory::positions() const {
  std::vector<Vec2> out;
  out.reserve(poses.size());
  for (const Pose& p : poses) out.push_back(p.position());
  return out;
}

std::vector<double> Trajectory::yaws() const {
  std::vector<double> out;
  out.reserve(poses.size());
  for (const Pose& p : poses) out.push_back(p.yaw());
  return out;
}

std::size_t fit_to_horizon(std::vector<Pose>& poses, std::size_t horizon) {
  if (poses.empty()) throw_invalid("fit_to_horizon: empty pose sequence");
  if (poses.size() >= horizon) {
    poses.resize(horizon);
    return horizon;
  }
  const std::size_t real = poses.size();
  poses.resize(horizon, poses.back());
  return real;
}

}  // namespace diffplan
