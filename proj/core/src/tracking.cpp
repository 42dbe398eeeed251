#include "diffplan/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "diffplan/error.hpp"

namespace diffplan::sim {

std::vector<double> speed_profile(const Trajectory& traj) {
  std::vector<double> v;
  for (std::size_t i = 1; i < traj.poses.size(); ++i) {
    const Pose& a = traj.poses[i - 1];
    const Pose& b = traj.poses[i];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double d = std::hypot(dx, dy);
    const double heading = a.yaw();
    const double along = dx * std::cos(heading) + dy * std::sin(heading);
    v.push_back((along < 0.0 ? -d : d) / traj.dt);
  }
  return v;
}

double mean_tracking_error(const std::vector<VehicleState>& states, const Trajectory& traj) {
  const std::size_t n = std::min(states.size(), traj.poses.size());
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) sum += std::hypot(states[k].x - traj.poses[k].x, states[k].y - traj.poses[k].y);
  return sum / static_cast<double>(n);
}

namespace {

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

// Lookahead target: first reference point at least `ld` ahead of the closest
// point, without crossing a change of driving direction.
Vec2 lookahead_point(const Trajectory& traj, const std::vector<double>& prof, std::size_t& cursor, Vec2 pos,
                     double ld) {
  const std::size_t n = traj.poses.size();
  std::size_t best = cursor;
  double best_d = std::hypot(traj.poses[cursor].x - pos.x, traj.poses[cursor].y - pos.y);
  const std::size_t window = std::min(n, cursor + 30);
  for (std::size_t i = cursor + 1; i < window; ++i) {
    const double d = std::hypot(traj.poses[i].x - pos.x, traj.poses[i].y - pos.y);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  cursor = best;
  const int dir = best < prof.size() ? sign_of(prof[best]) : 0;
  std::size_t i = best;
  while (i + 1 < n) {
    if (i < prof.size() && dir != 0 && sign_of(prof[i]) != 0 && sign_of(prof[i]) != dir) break;
    if (std::hypot(traj.poses[i].x - pos.x, traj.poses[i].y - pos.y) >= ld) break;
    ++i;
  }
  return traj.poses[i].position();
}

}  // namespace

TrackResult pure_pursuit_track(const Trajectory& traj, const VehicleParams& params, const PurePursuitConfig& cfg) {
  if (!(traj.dt > 0.0) || !(cfg.control_dt > 0.0)) throw_invalid("tracking needs positive time steps");
  TrackResult res;
  if (traj.poses.empty()) return res;
  res.speed_profile = speed_profile(traj);
  const std::vector<double>& prof = res.speed_profile;
  const int sub = std::max(1, static_cast<int>(std::lround(traj.dt / cfg.control_dt)));
  const double ts = traj.dt / sub;
  const std::size_t extra = static_cast<std::size_t>(std::lround(cfg.settle_time / traj.dt));
  const std::size_t total = traj.poses.size() + extra;

  VehicleState s{traj.poses[0].x, traj.poses[0].y, traj.poses[0].yaw(), prof.empty() ? 0.0 : prof[0]};
  s.v = std::clamp(s.v, params.v_min, params.v_max);
  res.states.push_back(s);
  std::size_t cursor = 0;
  for (std::size_t k = 0; k + 1 < total; ++k) {
    for (int j = 0; j < sub; ++j) {
      const double target_v = k < prof.size() ? std::clamp(prof[k], params.v_min, params.v_max) : 0.0;
      const double ld = std::max(cfg.min_lookahead, cfg.lookahead_gain * std::abs(s.v));
      const Vec2 tgt = lookahead_point(traj, prof, cursor, s.position(), ld);
      const double dx = tgt.x - s.x;
      const double dy = tgt.y - s.y;
      const double dist = std::hypot(dx, dy);
      double delta = 0.0;
      const int dir = target_v != 0.0 ? sign_of(target_v) : sign_of(s.v);
      if (dist > 1e-6 && dir != 0) {
        const double frame = dir > 0 ? s.phi : s.phi + std::numbers::pi;
        const double alpha = wrap_angle(std::atan2(dy, dx) - frame);
        const double steer = std::atan(2.0 * params.wheelbase * std::sin(alpha) / std::max(dist, 1e-6));
        delta = dir > 0 ? steer : -steer;
      }
      const Control u{delta, (target_v - s.v) / ts};
      s = kinematic_step(s, u, ts, params);
    }
    res.states.push_back(s);
  }
  res.mean_error = mean_tracking_error(res.states, traj);
  return res;
}

namespace {

datagen::ReferencePath::Sample interpolate(const Trajectory& traj, double t) {
  const double u = std::clamp(t / traj.dt, 0.0, static_cast<double>(traj.poses.size() - 1));
  const auto i = static_cast<std::size_t>(std::floor(u));
  const std::size_t j = std::min(i + 1, traj.poses.size() - 1);
  const double f = u - static_cast<double>(i);
  const Pose& a = traj.poses[i];
  const Pose& b = traj.poses[j];
  const double ya = a.yaw();
  return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y), wrap_angle(ya + f * wrap_angle(b.yaw() - ya))};
}

}  // namespace

TrackResult mpc_track(const Trajectory& traj, const VehicleParams& params, const datagen::MpcConfig& cfg) {
  if (!(traj.dt > 0.0)) throw_invalid("tracking needs a positive time step");
  TrackResult res;
  if (traj.poses.empty()) return res;
  res.speed_profile = speed_profile(traj);
  datagen::MpcConfig mc = cfg;
  mc.gamma = 0.0;
  datagen::MpcSolver solver(mc, params);
  const int sub = std::max(1, static_cast<int>(std::lround(traj.dt / mc.ts)));
  VehicleState s{traj.poses[0].x, traj.poses[0].y, traj.poses[0].yaw(),
                 res.speed_profile.empty() ? 0.0 : std::clamp(res.speed_profile[0], params.v_min, params.v_max)};
  res.states.push_back(s);
  std::vector<Control> warm;
  for (std::size_t k = 0; k + 1 < traj.poses.size(); ++k) {
    for (int j = 0; j < sub; ++j) {
      const double t = static_cast<double>(k) * traj.dt + j * mc.ts;
      datagen::MpcProblem prob;
      prob.state = s;
      prob.t0 = t;
      for (int h = 1; h <= mc.horizon; ++h) prob.refs.push_back(interpolate(traj, t + h * mc.ts));
      prob.warm_start = warm;
      datagen::MpcSolution sol;
      try {
        sol = solver.solve(prob);
      } catch (const datagen::MpcNotConverged& e) {
        sol = e.best();
      } catch (const Error&) {
        res.solver_failed = true;
        res.mean_error = mean_tracking_error(res.states, traj);
        return res;
      }
      warm.assign(sol.controls.begin() + 1, sol.controls.end());
      warm.push_back(sol.controls.back());
      s = kinematic_step(s, sol.controls.front(), mc.ts, params);
    }
    res.states.push_back(s);
  }
  res.mean_error = mean_tracking_error(res.states, traj);
  return res;
}

CollisionCheck collision_during_tracking(const std::vector<VehicleState>& states, double dt,
                                         const CollisionWorld& world, const VehicleParams& params) {
  CollisionCheck c;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const double d = world.distance(footprint_polygon(states[k].pose(), params), static_cast<double>(k) * dt);
    c.clearance.push_back(d);
    if (!c.collided && d <= 0.0) {
      c.collided = true;
      c.first_index = k;
    }
  }
  return c;
}

}  // namespace diffplan::sim
