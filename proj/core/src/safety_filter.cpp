#include "diffplan/safety_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "diffplan/error.hpp"
#include "json.hpp"

namespace diffplan::filter {

void FilterConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfigValidation, "filter: " + what); };
  if (n_filter < 2) fail("n_filter must be at least 2");
  if (n_retry < 1) fail("n_retry must be at least 1");
  for (double w : omega)
    if (!(w >= 0.0)) fail("weights must be non-negative");
  if (!(v_inf > 0.0)) fail("v_inf must be positive");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (!(v_eps >= 0.0)) fail("v_eps must be non-negative");
}

TrajectoryKinematics trajectory_kinematics(const std::vector<Vec2>& q, const std::vector<double>& phi, double dt,
                                           double wheelbase, double v_eps) {
  if (!(dt > 0.0)) throw_invalid("kinematics need dt > 0");
  if (q.size() != phi.size()) throw Error(ErrorCode::kShapeMismatch, "positions and yaws differ in length");
  TrajectoryKinematics k;
  for (std::size_t i = 1; i < q.size(); ++i) {
    const double d = std::hypot(q[i].x - q[i - 1].x, q[i].y - q[i - 1].y);
    k.d.push_back(d);
    k.length += d;
    k.v.push_back(d / dt);
    k.r.push_back(wrap_angle(phi[i] - phi[i - 1]) / dt);
  }
  for (std::size_t i = 1; i < k.v.size(); ++i) k.a.push_back((k.v[i] - k.v[i - 1]) / dt);
  for (std::size_t i = 0; i < k.v.size(); ++i)
    k.delta.push_back(std::abs(k.v[i]) > v_eps ? std::atan(wheelbase * k.r[i] / k.v[i]) : 0.0);
  return k;
}

std::vector<double> minmax_normalize(const std::vector<double>& values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double mn = *lo;
  const double span = *hi - mn;
  std::vector<double> out(values.size(), 0.0);
  // Spreads at rounding level count as degenerate.
  if (!(span > 1e-9 * std::max(1.0, std::max(std::abs(mn), std::abs(*hi))))) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mn) / span;
  return out;
}

Clearance clearance(const Trajectory& traj, const sim::CollisionWorld& world, const VehicleParams& params) {
  Clearance c;
  c.rho = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.poses.size(); ++k) {
    const double d = world.distance(footprint_polygon(traj.poses[k], params), static_cast<double>(k) * traj.dt);
    c.per_point.push_back(d);
    c.rho = std::min(c.rho, d);
  }
  if (c.per_point.empty()) c.rho = 0.0;
  return c;
}

double yaw_continuity(const Trajectory& traj, const FilterConfig& cfg, const VehicleParams& params) {
  const double limit = params.max_yaw_rate * cfg.dt;
  for (std::size_t i = 1; i < traj.poses.size(); ++i) {
    const double dphi = wrap_angle(traj.poses[i].yaw() - traj.poses[i - 1].yaw());
    if (!(std::abs(dphi) < limit)) return cfg.v_inf;
  }
  return 0.0;
}

std::vector<CandidateScore> score_batch(const std::vector<Trajectory>& batch, const sim::CollisionWorld& world,
                                        const FilterConfig& cfg, const VehicleParams& params) {
  std::vector<CandidateScore> scores(batch.size());
  std::vector<double> lengths, accels, steers;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Trajectory& tr = batch[i];
    const TrajectoryKinematics k = trajectory_kinematics(tr.positions(), tr.yaws(), cfg.dt, params.wheelbase, cfg.v_eps);
    CandidateScore& s = scores[i];
    s.length = k.length;
    for (double a : k.a) s.accel_sq += a * a;
    for (double d : k.delta) s.steer_sq += d * d;
    s.rho = clearance(tr, world, params).rho;
    s.j_safe = s.rho > 0.0 ? 1.0 / (s.rho + 1.0) : cfg.v_inf;
    s.yaw_penalty = yaw_continuity(tr, cfg, params);
    lengths.push_back(s.length);
    accels.push_back(s.accel_sq);
    steers.push_back(s.steer_sq);
  }
  const std::vector<double> ln = minmax_normalize(lengths);
  const std::vector<double> an = minmax_normalize(accels);
  const std::vector<double> sn = minmax_normalize(steers);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    CandidateScore& s = scores[i];
    s.length_norm = ln[i];
    s.accel_norm = an[i];
    s.steer_norm = sn[i];
    s.cost = cfg.omega[0] * ln[i] + cfg.omega[1] * an[i] + cfg.omega[2] * sn[i] + cfg.omega[3] * s.j_safe;
  }
  return scores;
}

std::optional<std::size_t> best_candidate(const std::vector<CandidateScore>& scores) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!scores[i].valid()) continue;
    if (!best || scores[i].cost < scores[*best].cost) best = i;
  }
  return best;
}

Selection select_trajectory(const BatchSampler& sampler, const sim::CollisionWorld& world, const FilterConfig& cfg,
                            const VehicleParams& params) {
  cfg.validate();
  Selection sel;
  for (int k = 0; k < cfg.n_retry; ++k) {
    std::vector<Trajectory> batch = sampler(k);
    ++sel.batches;
    std::vector<CandidateScore> scores = score_batch(batch, world, cfg, params);
    const std::optional<std::size_t> best = best_candidate(scores);
    sel.history.push_back(std::move(scores));
    if (best) {
      sel.index = *best;
      sel.trajectory = std::move(batch[*best]);
      return sel;
    }
  }
  return sel;
}

std::string explain(const Selection& sel) {
  nlohmann::ordered_json j;
  j["accepted"] = sel.trajectory.has_value();
  j["batches"] = sel.batches;
  if (sel.trajectory) j["selected"] = {{"batch", sel.batches - 1}, {"index", sel.index}};
  j["candidates"] = nlohmann::ordered_json::array();
  for (std::size_t b = 0; b < sel.history.size(); ++b) {
    for (std::size_t i = 0; i < sel.history[b].size(); ++i) {
      const CandidateScore& s = sel.history[b][i];
      j["candidates"].push_back({{"batch", b},
                                 {"index", i},
                                 {"length", s.length},
                                 {"accel_sq", s.accel_sq},
                                 {"steer_sq", s.steer_sq},
                                 {"length_norm", s.length_norm},
                                 {"accel_norm", s.accel_norm},
                                 {"steer_norm", s.steer_norm},
                                 {"rho", s.rho},
                                 {"j_safe", s.j_safe},
                                 {"yaw_ok", s.yaw_penalty == 0.0},
                                 {"cost", s.cost}});
    }
  }
  return j.dump(2) + "\n";
}

}  // namespace diffplan::filter
