#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "diffplan/tracking.hpp"

using namespace diffplan;
using namespace diffplan::sim;

namespace {

// Reference produced by the vehicle model itself under smooth controls.
Trajectory model_reference(int length, double dt) {
  VehicleParams params;
  VehicleState s{1.0, 1.0, 0.2, 0.3};
  Trajectory t;
  t.dt = dt;
  const int sub = 10;
  for (int k = 0; k < length; ++k) {
    t.poses.push_back(Pose::from_yaw(s.x, s.y, s.phi));
    for (int j = 0; j < sub; ++j) {
      const double time = k * dt + j * dt / sub;
      s = kinematic_step(s, {0.25 * std::sin(0.8 * time), 0.1}, dt / sub, params);
    }
  }
  return t;
}

Trajectory corner(bool smooth) {
  Trajectory t;
  t.dt = 0.1;
  const double step = 0.03;
  for (int i = 0; i < 20; ++i) t.poses.push_back(Pose::from_yaw(1.0 + i * step, 1.0, 0.0));
  if (smooth) {
    const double r = 0.3;
    const Vec2 c{1.0 + 20 * step, 1.0 + r};
    const int n = static_cast<int>(std::ceil(kPi / 2 * r / step));
    for (int i = 0; i < n; ++i) {
      const double a = -kPi / 2 + (i + 1) * kPi / 2 / n;
      t.poses.push_back(Pose::from_yaw(c.x + r * std::cos(a), c.y + r * std::sin(a), a + kPi / 2));
    }
    const Pose last = t.poses.back();
    for (int i = 1; i <= 20; ++i) t.poses.push_back(Pose::from_yaw(last.x, last.y + i * step, kPi / 2));
  } else {
    const Pose last = Pose::from_yaw(1.0 + 20 * step, 1.0, kPi / 2);
    for (int i = 0; i < 30; ++i) t.poses.push_back(Pose::from_yaw(last.x, last.y + i * step, kPi / 2));
  }
  return t;
}

std::vector<VehicleState> states_along_x(double x0, double y, double spacing, int n) {
  std::vector<VehicleState> s;
  for (int k = 0; k < n; ++k) s.push_back({x0 + spacing * k, y, 0.0, spacing / 0.1});
  return s;
}

}  // namespace

TEST_SUITE("simworld") {
  TEST_CASE("CS1 obstacle playback") {
    const SceneSpec scene = load_scene(testutil::source_path("scenes/cs1_dynamic.scene"));
    REQUIRE(scene.dynamic.size() == 1);
    const DynamicObstacle& o = scene.dynamic[0];
    CHECK(o.position(0.0).x == doctest::Approx(3.5));
    CHECK(o.position(0.0).y == doctest::Approx(1.2));
    CHECK(o.start.yaw() == doctest::Approx(kPi));
    CHECK(o.position(1.0).x == doctest::Approx(3.1).epsilon(1e-12));
    CHECK(o.position(1.0).y == doctest::Approx(1.2).epsilon(1e-12));
    const Vec2 end = o.position(7.1);
    CHECK(end.x == doctest::Approx(3.5 - 2.84).epsilon(1e-12));
    for (double t : {7.2, 10.0, 100.0}) {
      CHECK(o.position(t).x == end.x);
      CHECK(o.position(t).y == end.y);
    }
    const ObstacleTrack track = o.sample(0.1, 128);
    CHECK(track(0, 10) == doctest::Approx(3.1));
    CHECK(track(0, 127) == end.x);
  }

  TEST_CASE("speed profile signs follow the direction of travel") {
    Trajectory t = testutil::straight(1.0, 1.0, 0.0, 0.04, 11);
    for (int i = 1; i <= 10; ++i) t.poses.push_back(Pose::from_yaw(1.4 - 0.04 * i, 1.0, 0.0));
    const std::vector<double> v = speed_profile(t);
    REQUIRE(v.size() == 20);
    for (int i = 0; i < 10; ++i) CHECK(v[i] == doctest::Approx(0.4));
    for (int i = 10; i < 20; ++i) CHECK(v[i] == doctest::Approx(-0.4));
  }

  TEST_CASE("pure pursuit on a straight line stays within 1 cm") {
    const Trajectory t = testutil::straight(1.0, 2.0, 0.0, 0.04, 80);
    const TrackResult r = pure_pursuit_track(t, VehicleParams{});
    REQUIRE(r.states.size() == 80);
    double worst = 0.0;
    for (const VehicleState& s : r.states) worst = std::max(worst, std::abs(s.y - 2.0));
    CHECK(worst < 0.01);
    CHECK(r.mean_error < 0.01);
  }

  TEST_CASE("all-padded trajectory keeps the vehicle at the start") {
    const Trajectory t = testutil::straight(2.0, 3.0, 1.0, 0.0, 30);
    const TrackResult r = pure_pursuit_track(t, VehicleParams{});
    for (const VehicleState& s : r.states) {
      CHECK(s.x == 2.0);
      CHECK(s.y == 3.0);
    }
  }

  TEST_CASE("gear shift reverses the commanded speed at the switch index") {
    Trajectory t = testutil::straight(1.0, 1.0, 0.0, 0.04, 21);
    for (int i = 1; i <= 20; ++i) t.poses.push_back(Pose::from_yaw(1.8 - 0.04 * i, 1.0, 0.0));
    const TrackResult r = pure_pursuit_track(t, VehicleParams{});
    CHECK(r.speed_profile[19] > 0.0);
    CHECK(r.speed_profile[20] < 0.0);
    CHECK(r.states[20].v > 0.0);
    CHECK(r.states.back().v < 0.0);
    CHECK(r.states.back().x < r.states[22].x - 0.3);
  }

  TEST_CASE("tracking is deterministic") {
    const Trajectory t = corner(true);
    const TrackResult a = pure_pursuit_track(t, VehicleParams{});
    const TrackResult b = pure_pursuit_track(t, VehicleParams{});
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t k = 0; k < a.states.size(); ++k) {
      CHECK(a.states[k].x == b.states[k].x);
      CHECK(a.states[k].y == b.states[k].y);
      CHECK(a.states[k].phi == b.states[k].phi);
    }
  }

  TEST_CASE("MPC tracking of a model-generated reference") {
    const Trajectory ref = model_reference(40, 0.1);
    const TrackResult r = mpc_track(ref, VehicleParams{});
    CHECK_FALSE(r.solver_failed);
    CHECK(r.states.size() == ref.size());
    CHECK(r.mean_error < 0.02);
    CHECK(r.mean_error == doctest::Approx(mean_tracking_error(r.states, ref)));
  }

  TEST_CASE("square corners track worse than smoothed corners") {
    const TrackResult square = mpc_track(corner(false), VehicleParams{});
    const TrackResult smooth = mpc_track(corner(true), VehicleParams{});
    CHECK(square.mean_error > smooth.mean_error);
  }

  TEST_CASE("collision checks") {
    const VehicleParams params;
    const auto states = states_along_x(1.0, 1.0, 0.1, 30);
    CHECK_FALSE(collision_during_tracking(states, 0.1, CollisionWorld(testutil::empty_scene(6, 6)), params).collided);

    SceneSpec wall = testutil::empty_scene(6, 6);
    wall.polygons.push_back(ConvexPolygon::rectangle(3.0, 0.0, 4.0, 2.0));
    const CollisionCheck c = collision_during_tracking(states, 0.1, CollisionWorld(wall), params);
    CHECK(c.collided);
    // Front edge at x + 0.25 reaches the wall at x = 2.75, first sampled at k = 18.
    CHECK(c.first_index == 18);
    CHECK(c.clearance.size() == 30);
  }

  TEST_CASE("near miss at one grid cell is not a collision") {
    SceneSpec s = testutil::empty_scene(6, 6);
    s.resolution = 0.05;
    s.grid_runs.push_back({20, 40, 1});  // x in [2.0, 2.05], y in [1.0, 1.05]
    const VehicleState v{2.0 - 0.05 - 0.25, 1.025, 0.0, 0.0};
    const CollisionCheck c = collision_during_tracking({v}, 0.1, CollisionWorld(s), VehicleParams{});
    CHECK_FALSE(c.collided);
    CHECK(c.clearance[0] == doctest::Approx(0.05).epsilon(1e-9));
  }

  TEST_CASE("dynamic collisions are checked at matching times") {
    SceneSpec s = testutil::empty_scene(6, 6);
    DynamicObstacle o;
    o.start = Pose::from_yaw(3.0, 0.2, kPi / 2);
    o.speed = 1.0;
    o.duration = 5.0;
    s.dynamic.push_back(o);
    const auto states = states_along_x(1.0, 3.0, 0.1, 30);
    // Ego reaches x = 3 at t = 2.0; the obstacle reaches y = 3 at t = 2.8.
    CHECK_FALSE(collision_during_tracking(states, 0.1, CollisionWorld(s), VehicleParams{}).collided);
    s.dynamic[0].start = Pose::from_yaw(3.0, 1.0, kPi / 2);
    CHECK(collision_during_tracking(states, 0.1, CollisionWorld(s), VehicleParams{}).collided);
  }
}
