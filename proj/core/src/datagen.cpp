#include "diffplan/datagen.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "diffplan/error.hpp"

namespace diffplan::datagen {

void Dataset::validate() const {
  for (const Demonstration& d : demos) {
    if (d.traj.size() != static_cast<std::size_t>(horizon)) throw_invalid("dataset: demonstration length differs from L");
    if (d.traj.dt != dt) throw_invalid("dataset: demonstration dt differs from the dataset dt");
    if (d.obstacle && d.obstacle->cols() != horizon) throw_invalid("dataset: obstacle track length differs from L");
  }
}

MpcConfig mpc_config_for_scene(const sim::SceneSpec& scene, MpcConfig base) {
  if (!scene.dynamic.empty()) base.gamma = scene.mpc_gamma.value_or(1.0);
  else base.gamma = 0.0;
  if (scene.mpc_alpha) base.alpha = *scene.mpc_alpha;
  return base;
}

Demonstration rollout_demonstration(const sim::SceneSpec& scene, const Pose& start, const Pose& goal,
                                    const MpcConfig& cfg, const VehicleParams& params, const RolloutOptions& opts) {
  const bool dynamic = cfg.gamma > 0.0;
  const ReferencePath ref =
      generate_reference_path(dynamic ? scene.dynamic_only() : scene, start, goal, opts.planner);

  MpcSolver solver(cfg, params);
  const int ticks_per_record = std::max(1, static_cast<int>(std::lround(opts.dt / cfg.ts)));
  const int max_ticks = static_cast<int>(std::ceil(opts.max_time / cfg.ts));

  VehicleState state{start.x, start.y, start.yaw(), 0.0};
  std::vector<Pose> poses{state.pose()};
  std::vector<Control> warm;
  double s_cur = 0.0;
  MpcProblem problem;
  problem.obstacles = dynamic ? scene.dynamic : std::vector<sim::DynamicObstacle>{};
  const Vec2 goal_p = goal.position();
  const int stall_ticks = static_cast<int>(std::ceil(opts.stall_time / cfg.ts));
  double best_progress = 0.0;
  int last_progress_tick = 0;

  for (int tick = 0;; ++tick) {
    if (tick > 0 && tick % ticks_per_record == 0) {
      poses.push_back(state.pose());
      if ((state.position() - goal_p).norm() < opts.goal_tolerance && std::abs(state.v) < opts.stop_speed) break;
    }
    if (tick >= max_ticks) throw Error(ErrorCode::kStepCapExceeded, "rollout did not reach the goal within the step cap");

    s_cur = ref.project(state.position(), s_cur, 0.1, 0.5);
    if (s_cur > best_progress + 0.01) {
      best_progress = s_cur;
      last_progress_tick = tick;
    } else if (tick - last_progress_tick > stall_ticks && (state.position() - goal_p).norm() > 0.2) {
      throw Error(ErrorCode::kStepCapExceeded, "rollout stalled before reaching the goal");
    }
    problem.state = state;
    problem.t0 = tick * cfg.ts;
    problem.refs.clear();
    for (double s : project_schedule(s_cur, cfg.v_ref, cfg.ts, cfg.horizon, ref.total_length()))
      problem.refs.push_back(ref.at(s));
    problem.warm_start = warm;

    std::vector<Control> u;
    try {
      u = solver.solve(problem).controls;
    } catch (const MpcNotConverged& e) {
      // Closed loop applies the best iterate found within the iteration cap.
      u = e.best().controls;
    }
    state = kinematic_step(state, u.front(), cfg.ts, params);
    warm.assign(u.begin() + 1, u.end());
    warm.push_back(u.back());
  }

  Demonstration demo;
  demo.truncated = poses.size() > static_cast<std::size_t>(opts.horizon);
  demo.real_length = static_cast<std::uint32_t>(fit_to_horizon(poses, static_cast<std::size_t>(opts.horizon)));
  demo.traj.poses = std::move(poses);
  demo.traj.dt = opts.dt;
  if (!scene.dynamic.empty()) demo.obstacle = scene.dynamic.front().sample(opts.dt, opts.horizon);
  return demo;
}

bool demonstration_collision_free(const Demonstration& demo, const sim::SceneSpec& scene, const MpcConfig& cfg,
                                  const VehicleParams& params) {
  const bool dynamic = cfg.gamma > 0.0;
  const sim::CollisionWorld world(scene);
  for (std::size_t j = 0; j < demo.traj.size(); ++j) {
    const ConvexPolygon body = footprint_polygon(demo.traj.poses[j], params);
    const double t = static_cast<double>(j) * demo.traj.dt;
    const double d = dynamic ? world.dynamic_distance(body, t) : world.static_distance(body);
    if (d <= 0.0) return false;
  }
  return true;
}

BuildResult build_dataset(const sim::SceneSpec& scene, const std::vector<Pose>& starts, const Pose& goal,
                          const MpcConfig& cfg, const VehicleParams& params, const RolloutOptions& opts, int jobs) {
  return build_dataset(scene, {}, starts, goal, cfg, params, opts, jobs);
}

BuildResult build_dataset(const sim::SceneSpec& scene, const std::vector<sim::SceneSpec>& variants,
                          const std::vector<Pose>& starts, const Pose& goal, const MpcConfig& cfg,
                          const VehicleParams& params, const RolloutOptions& opts, int jobs) {
  if (!variants.empty() && variants.size() != starts.size())
    throw_invalid("one scene variant per start is required");
  auto scene_of = [&](std::size_t i) -> const sim::SceneSpec& { return variants.empty() ? scene : variants[i]; };
  struct Slot {
    std::optional<Demonstration> demo;
    std::string error;
  };
  std::vector<Slot> slots(starts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < starts.size(); i = next++) {
      try {
        Demonstration d = rollout_demonstration(scene_of(i), starts[i], goal, cfg, params, opts);
        if (!demonstration_collision_free(d, scene_of(i), cfg, params)) {
          slots[i].error = "demonstration collides with the scene";
        } else {
          slots[i].demo = std::move(d);
        }
      } catch (const Error& e) {
        slots[i].error = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(starts.size())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  BuildResult result;
  result.dataset.dt = opts.dt;
  result.dataset.horizon = opts.horizon;
  result.dataset.map_id = scene.name;
  result.dataset.scene_hash = sim::scene_hash(scene);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].demo) result.dataset.demos.push_back(std::move(*slots[i].demo));
    else result.failures.push_back({i, slots[i].error});
  }
  return result;
}

std::vector<sim::SceneSpec> jitter_dynamic_obstacles(const sim::SceneSpec& scene, std::size_t n, double jitter,
                                                     std::uint64_t seed) {
  if (!(jitter >= 0.0)) throw_invalid("obstacle jitter must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-jitter, jitter);
  std::vector<sim::SceneSpec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    sim::SceneSpec v = scene;
    for (sim::DynamicObstacle& d : v.dynamic) {
      d.start.x += u(rng);
      d.start.y += u(rng);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Pose> sample_starts(const sim::SceneSpec& scene, std::size_t n, std::uint64_t seed,
                                const GridPlannerOptions& planner, double clearance) {
  if (!scene.goal) throw Error(ErrorCode::kConfigValidation, "scene has no goal pose");
  const std::array<double, 4> region =
      scene.start_region.value_or(std::array<double, 4>{0.0, 0.0, scene.width, scene.height});
  const sim::OccupancyGrid free_grid = inflate(scene.rasterize(), clearance, scene.width, scene.height);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(region[0], region[2]);
  std::uniform_real_distribution<double> uy(region[1], region[3]);
  std::vector<Pose> out;
  const std::size_t max_attempts = 1000 * (n + 1);
  for (std::size_t attempt = 0; out.size() < n && attempt < max_attempts; ++attempt) {
    const Vec2 p{ux(rng), uy(rng)};
    const int r = free_grid.row_of(p.y);
    const int c = free_grid.col_of(p.x);
    if (!free_grid.in_bounds(r, c) || free_grid.occupied(r, c)) continue;
    if ((p - scene.goal->position()).norm() < 1.0) continue;
    bool near_dynamic = false;
    for (const sim::DynamicObstacle& d : scene.dynamic) near_dynamic |= (p - d.position(0.0)).norm() < 0.8;
    if (near_dynamic) continue;
    try {
      const ReferencePath ref = generate_reference_path(scene, Pose{p.x, p.y, 0.0, 1.0}, *scene.goal, planner);
      if (scene.max_path_length > 0.0 && ref.total_length() > scene.max_path_length) continue;
      const ReferencePath::Sample ahead = ref.at(0.25);
      out.push_back(Pose::from_yaw(p.x, p.y, std::atan2(ahead.y - p.y, ahead.x - p.x)));
    } catch (const Error&) {
      continue;
    }
  }
  if (out.size() < n) throw Error(ErrorCode::kConfigValidation, "could not sample enough start poses");
  return out;
}

}  // namespace diffplan::datagen
