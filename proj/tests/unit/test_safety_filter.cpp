#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "diffplan/error.hpp"
#include "diffplan/safety_filter.hpp"

using namespace diffplan;
using namespace diffplan::filter;

namespace {

VehicleParams point_body() {
  VehicleParams p;
  p.length = 0.0;
  p.width = 0.0;
  return p;
}

sim::SceneSpec walled_scene() {
  sim::SceneSpec s = testutil::empty_scene(6.0, 6.0);
  s.polygons.push_back(ConvexPolygon::rectangle(4.0, 0.5, 5.0, 1.5));
  return s;
}

Trajectory through_wall() { return testutil::straight(4.2, 1.0, 0.0, 0.04, 5); }
Trajectory safe_short(double y = 3.0) { return testutil::straight(1.0, y, 0.0, 0.04, 5); }

}  // namespace

TEST_SUITE("safety_filter") {
  TEST_CASE("uniform straight line kinematics") {
    const Trajectory t = testutil::straight(0.5, 0.5, 0.7, 0.04, 20);
    const TrajectoryKinematics k = trajectory_kinematics(t.positions(), t.yaws(), 0.1, 0.33);
    CHECK(k.d.size() == 19);
    CHECK(k.v.size() == 19);
    CHECK(k.a.size() == 18);
    CHECK(k.r.size() == 19);
    CHECK(k.delta.size() == 19);
    for (double v : k.v) CHECK(v == doctest::Approx(0.4).epsilon(1e-12));
    for (double a : k.a) CHECK(std::abs(a) < 1e-9);
    for (double d : k.delta) CHECK(std::abs(d) < 1e-12);
    CHECK(k.length == doctest::Approx(19 * 0.04).epsilon(1e-12));
  }

  TEST_CASE("CS1 obstacle track is 2.84 m long") {
    const sim::SceneSpec scene = sim::load_scene(testutil::source_path("scenes/cs1_dynamic.scene"));
    REQUIRE(scene.dynamic.size() == 1);
    const ObstacleTrack track = scene.dynamic[0].sample(0.1, 90);
    std::vector<Vec2> q;
    for (int j = 0; j < track.cols(); ++j) q.push_back({track(0, j), track(1, j)});
    const TrajectoryKinematics k = trajectory_kinematics(q, std::vector<double>(q.size(), kPi), 0.1, 0.33);
    CHECK(k.length == doctest::Approx(2.84).epsilon(1e-9));
  }

  TEST_CASE("constant curvature arc gives atan(l_w kappa)") {
    const double kappa = 1.0, v = 0.5, dt = 0.1, lw = 0.33;
    const double dtheta = v * dt * kappa;
    std::vector<Vec2> q;
    std::vector<double> phi;
    for (int i = 0; i < 30; ++i) {
      const double th = i * dtheta;
      q.push_back({std::sin(th) / kappa, (1.0 - std::cos(th)) / kappa});
      phi.push_back(wrap_angle(th));
    }
    const TrajectoryKinematics k = trajectory_kinematics(q, phi, dt, lw);
    // Chord-based oracle: v = 2 sin(dtheta / 2) / (kappa dt), r = dtheta / dt.
    const double chord_delta = std::atan(lw * dtheta / (2.0 * std::sin(dtheta / 2.0) / kappa));
    for (double d : k.delta) {
      CHECK(d == doctest::Approx(chord_delta).epsilon(1e-9));
      CHECK(std::abs(d - std::atan(lw * kappa)) < 1e-4);
    }
  }

  TEST_CASE("steering is zero below the speed guard") {
    const Trajectory t = testutil::straight(1.0, 1.0, 0.3, 0.0, 5);
    std::vector<double> phi = t.yaws();
    phi[3] += 0.2;
    const TrajectoryKinematics k = trajectory_kinematics(t.positions(), phi, 0.1, 0.33);
    for (double d : k.delta) CHECK(d == 0.0);
    CHECK_THROWS_AS(trajectory_kinematics(t.positions(), phi, 0.0, 0.33), Error);
  }

  TEST_CASE("min-max normalization examples") {
    CHECK(minmax_normalize({1, 3}) == std::vector<double>{0, 1});
    CHECK(minmax_normalize({2, 2, 2}) == std::vector<double>{0, 0, 0});
    CHECK(minmax_normalize({5, 1, 3}) == std::vector<double>{1, 0, 0.5});
    CHECK(minmax_normalize({}).empty());
  }

  TEST_CASE("clearance through a wall is zero") {
    const sim::CollisionWorld world(walled_scene());
    CHECK(clearance(through_wall(), world, VehicleParams{}).rho == 0.0);
  }

  TEST_CASE("point body one metre from a point obstacle") {
    sim::SceneSpec s = testutil::empty_scene(10.0, 10.0);
    sim::DynamicObstacle o;
    o.start = Pose::from_yaw(6.0, 5.0, 0.0);
    o.length = 0.0;
    o.width = 0.0;
    s.dynamic.push_back(o);
    const Trajectory t = testutil::straight(5.0, 5.0, 0.0, 0.0, 3);
    const Clearance c = clearance(t, sim::CollisionWorld(s), point_body());
    CHECK(c.rho == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.per_point.size() == 3);
  }

  TEST_CASE("crossing paths at different times keep positive clearance") {
    sim::SceneSpec s = testutil::empty_scene(6.0, 6.0);
    sim::DynamicObstacle o;
    o.start = Pose::from_yaw(3.0, 1.0, kPi / 2);
    o.speed = 1.0;
    o.duration = 10.0;
    o.length = 0.0;
    o.width = 0.0;
    s.dynamic.push_back(o);
    const Trajectory t = testutil::straight(2.0, 3.0, 0.0, 0.1, 21);
    const Clearance c = clearance(t, sim::CollisionWorld(s), point_body());
    // Brute force over (point, time) pairs plus the map boundary.
    double oracle = 1e9;
    for (int k = 0; k < 21; ++k) {
      const double x = 2.0 + 0.1 * k, y = 3.0;
      const double oy = std::min(1.0 + 0.1 * k, 11.0);
      oracle = std::min({oracle, std::hypot(x - 3.0, y - oy), x, 6.0 - x, y, 6.0 - y});
    }
    CHECK(c.rho > 0.0);
    CHECK(c.rho == doctest::Approx(oracle).epsilon(1e-9));
    // The same geometry frozen in time collides.
    s.dynamic[0].start = Pose::from_yaw(3.0, 3.0, kPi / 2);
    s.dynamic[0].speed = 0.0;
    CHECK(clearance(t, sim::CollisionWorld(s), point_body()).rho == 0.0);
  }

  TEST_CASE("three hand-built candidates") {
    const sim::CollisionWorld world(walled_scene());
    const FilterConfig cfg;
    const VehicleParams params;
    const std::vector<Trajectory> batch{safe_short(), testutil::straight(1.0, 3.0, 0.0, 0.08, 5), through_wall()};
    const std::vector<CandidateScore> s = score_batch(batch, world, cfg, params);
    // Lengths 0.16, 0.32, 0.16 normalize to 0, 1, 0. No acceleration or steering.
    // Both safe candidates are nearest to the left boundary: rho = 1.0 - 0.25.
    CHECK(s[0].rho == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(s[1].rho == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(s[2].rho == 0.0);
    CHECK(s[0].cost == doctest::Approx(1.0 / 1.75).epsilon(1e-12));
    CHECK(s[1].cost == doctest::Approx(1.0 + 1.0 / 1.75).epsilon(1e-12));
    CHECK(s[2].cost == doctest::Approx(1e6).epsilon(1e-12));
    CHECK(s[0].cost < s[1].cost);
    CHECK(s[1].cost < s[2].cost);
    CHECK(best_candidate(s) == std::optional<std::size_t>(0));
  }

  TEST_CASE("a colliding candidate is never chosen over a safe one") {
    const sim::CollisionWorld world(walled_scene());
    FilterConfig cfg;
    const std::vector<Trajectory> batch{through_wall(), testutil::straight(1.0, 3.0, 0.3, 0.09, 30)};
    const std::vector<CandidateScore> s = score_batch(batch, world, cfg, VehicleParams{});
    CHECK(s[0].cost >= cfg.v_inf * cfg.omega[3]);
    CHECK(best_candidate(s) == std::optional<std::size_t>(1));
  }

  TEST_CASE("identical candidates tie to the lowest index") {
    const sim::CollisionWorld world(walled_scene());
    const std::vector<Trajectory> batch(4, safe_short());
    const std::vector<CandidateScore> s = score_batch(batch, world, FilterConfig{}, VehicleParams{});
    for (const CandidateScore& c : s) CHECK(c.cost == s[0].cost);
    CHECK(best_candidate(s) == std::optional<std::size_t>(0));
  }

  TEST_CASE("yaw continuity gate") {
    FilterConfig cfg;
    VehicleParams params;
    CHECK(yaw_continuity(safe_short(), cfg, params) == 0.0);
    Trajectory jump = safe_short();
    jump.poses[2] = Pose::from_yaw(jump.poses[2].x, jump.poses[2].y, kPi / 2);
    CHECK(params.max_yaw_rate * cfg.dt == doctest::Approx(0.32));
    CHECK(yaw_continuity(jump, cfg, params) == cfg.v_inf);

    Trajectory edge = safe_short();
    edge.poses[2] = Pose::from_yaw(edge.poses[2].x, edge.poses[2].y, 0.3);
    const double step = std::abs(wrap_angle(edge.poses[2].yaw() - edge.poses[1].yaw()));
    cfg.dt = 1.0;
    params.max_yaw_rate = step;
    CHECK(yaw_continuity(edge, cfg, params) == cfg.v_inf);
    params.max_yaw_rate = std::nextafter(step, 1.0);
    CHECK(yaw_continuity(edge, cfg, params) == 0.0);

    Trajectory wrap = testutil::straight(1.0, 3.0, kPi - 0.01, 0.0, 3);
    wrap.poses[2] = Pose::from_yaw(1.0, 3.0, -kPi + 0.01);
    CHECK(yaw_continuity(wrap, FilterConfig{}, VehicleParams{}) == 0.0);
  }

  TEST_CASE("retry loop contract") {
    const sim::CollisionWorld world(walled_scene());
    FilterConfig cfg;
    cfg.n_retry = 3;
    int calls = 0;
    const Selection empty = select_trajectory(
        [&](int) {
          ++calls;
          return std::vector<Trajectory>(8, through_wall());
        },
        world, cfg, VehicleParams{});
    CHECK_FALSE(empty.trajectory.has_value());
    CHECK(calls == 3);
    CHECK(empty.batches == 3);

    calls = 0;
    const Selection first = select_trajectory(
        [&](int) {
          ++calls;
          std::vector<Trajectory> b(8, through_wall());
          b[5] = safe_short();
          return b;
        },
        world, cfg, VehicleParams{});
    REQUIRE(first.trajectory.has_value());
    CHECK(calls == 1);
    CHECK(first.index == 5);
    CHECK(first.trajectory->to_array() == safe_short().to_array());
  }

  TEST_CASE("success rate with a half-safe sampler is 1 - 0.5^N_retry") {
    const sim::CollisionWorld world(walled_scene());
    FilterConfig cfg;
    cfg.n_retry = 3;
    std::mt19937_64 rng(17);
    std::bernoulli_distribution safe(0.5);
    const int runs = 1000;
    int ok = 0;
    for (int r = 0; r < runs; ++r) {
      const Selection s = select_trajectory(
          [&](int) {
            std::vector<Trajectory> b(2, through_wall());
            if (safe(rng)) b[1] = safe_short();
            return b;
          },
          world, cfg, VehicleParams{});
      if (s.trajectory) ++ok;
    }
    const double p = 1.0 - std::pow(0.5, cfg.n_retry);
    const double se = std::sqrt(p * (1.0 - p) / runs);
    CHECK(std::abs(static_cast<double>(ok) / runs - p) < 3.0 * se);
  }

  TEST_CASE("selected trajectories never violate the gates") {
    const sim::CollisionWorld world(walled_scene());
    FilterConfig cfg;
    cfg.n_retry = 2;
    const VehicleParams params;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
      const Selection s = select_trajectory(
          [&](int) {
            std::vector<Trajectory> b;
            for (int i = 0; i < 8; ++i) {
              Trajectory t = testutil::straight(1.0 + 2.0 * u(rng), 2.0 + 2.0 * u(rng), 6.0 * u(rng) - 3.0,
                                                0.05 * u(rng), 12);
              const double roll = u(rng);
              if (roll < 0.4) t = through_wall();
              else if (roll < 0.8) t.poses[6] = Pose::from_yaw(t.poses[6].x, t.poses[6].y, t.poses[5].yaw() + 1.0);
              b.push_back(t);
            }
            return b;
          },
          world, cfg, params);
      if (!s.trajectory) continue;
      CHECK(clearance(*s.trajectory, world, params).rho > 0.0);
      CHECK(yaw_continuity(*s.trajectory, cfg, params) == 0.0);
    }
  }

  TEST_CASE("positive affine maps of the lengths leave the ranking unchanged") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> x(8), y(8);
      const double a = u(rng), b = u(rng) - 2.5;
      for (int i = 0; i < 8; ++i) {
        x[i] = u(rng);
        y[i] = a * x[i] + b;
      }
      const std::vector<double> nx = minmax_normalize(x), ny = minmax_normalize(y);
      for (int i = 0; i < 8; ++i) CHECK(std::abs(nx[i] - ny[i]) < 1e-12);
      CHECK(std::min_element(nx.begin(), nx.end()) - nx.begin() == std::min_element(ny.begin(), ny.end()) - ny.begin());
      // Power-of-two scaling is exact in floating point.
      std::vector<double> scaled = x;
      for (double& v : scaled) v *= 4.0;
      CHECK(minmax_normalize(scaled) == nx);
    }
  }

  TEST_CASE("more clearance never raises the cost") {
    const sim::CollisionWorld world(walled_scene());
    double prev = 1e9;
    double prev_rho = 0.0;
    for (double y : {0.5, 0.8, 1.2, 2.0, 3.0}) {
      const std::vector<Trajectory> batch{safe_short(y), testutil::straight(1.0, 3.0, 0.0, 0.08, 5)};
      const std::vector<CandidateScore> s = score_batch(batch, world, FilterConfig{}, VehicleParams{});
      CHECK(s[0].rho >= prev_rho);
      CHECK(s[0].cost <= prev);
      prev = s[0].cost;
      prev_rho = s[0].rho;
    }
  }

  TEST_CASE("explain output lists every candidate") {
    const sim::CollisionWorld world(walled_scene());
    FilterConfig cfg;
    cfg.n_retry = 2;
    int calls = 0;
    const Selection s = select_trajectory(
        [&](int) {
          std::vector<Trajectory> b(3, through_wall());
          if (calls++ == 1) b[2] = safe_short();
          return b;
        },
        world, cfg, VehicleParams{});
    const nlohmann::json j = nlohmann::json::parse(explain(s));
    CHECK(j["accepted"] == true);
    CHECK(j["batches"] == 2);
    CHECK(j["selected"]["index"] == 2);
    CHECK(j["selected"]["batch"] == 1);
    REQUIRE(j["candidates"].size() == 6);
    CHECK(j["candidates"][0]["rho"] == 0.0);
    CHECK(j["candidates"][5]["yaw_ok"] == true);
  }

  TEST_CASE("filter config validation") {
    FilterConfig c;
    CHECK_NOTHROW(c.validate());
    c.n_filter = 1;
    CHECK_THROWS_AS(c.validate(), Error);
    c = FilterConfig{};
    c.omega[2] = -1.0;
    CHECK_THROWS_AS(c.validate(), Error);
  }
}
