#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "diffplan/error.hpp"
#include "diffplan/geometry.hpp"
#include "diffplan/trajectory.hpp"
#include "diffplan/vehicle.hpp"

using namespace diffplan;

namespace {

// Classic RK4 on the bicycle ODE with constant control, many sub-steps.
VehicleState rk4(VehicleState s, const Control& u, double ts, const VehicleParams& p, int substeps) {
  const double h = ts / substeps;
  auto f = [&](const VehicleState& z) { return vehicle_derivative(z, u, p); };
  auto add = [](const VehicleState& a, const VehicleState& d, double k) {
    return VehicleState{a.x + k * d.x, a.y + k * d.y, a.phi + k * d.phi, a.v + k * d.v};
  };
  for (int i = 0; i < substeps; ++i) {
    const VehicleState k1 = f(s);
    const VehicleState k2 = f(add(s, k1, h / 2));
    const VehicleState k3 = f(add(s, k2, h / 2));
    const VehicleState k4 = f(add(s, k3, h));
    s.x += h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    s.y += h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y);
    s.phi += h / 6 * (k1.phi + 2 * k2.phi + 2 * k3.phi + k4.phi);
    s.v += h / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
  }
  return s;
}

double state_error(const VehicleState& a, const VehicleState& b) {
  return std::max({std::abs(a.x - b.x), std::abs(a.y - b.y), std::abs(wrap_angle(a.phi - b.phi)),
                   std::abs(a.v - b.v)});
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("yaw_to_quat fixed points") {
    const Quat2 q0 = yaw_to_quat(0.0);
    CHECK(q0.qz == 0.0);
    CHECK(q0.qw == 1.0);
    const Quat2 qpi = yaw_to_quat(kPi);
    CHECK(qpi.qz == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(qpi.qw) < 1e-15);
  }

  TEST_CASE("yaw_to_quat rejects non-finite input") {
    try {
      yaw_to_quat(std::numeric_limits<double>::quiet_NaN());
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidArgument);
    }
    CHECK_THROWS_AS(yaw_to_quat(std::numeric_limits<double>::infinity()), Error);
  }

  TEST_CASE("quat_to_yaw on an unnormalized pose quaternion") {
    const double expected = wrap_angle(2.0 * std::atan2(0.891, -0.454));
    CHECK(quat_to_yaw(0.891, -0.454) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(-2.2005).epsilon(1e-3));
  }

  TEST_CASE("quaternion round trip over (-pi, pi]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int i = 0; i < 10000; ++i) {
      double phi = u(rng);
      if (phi == -kPi) phi = kPi;
      const Quat2 q = yaw_to_quat(phi);
      CHECK(std::abs(q.qz * q.qz + q.qw * q.qw - 1.0) < 1e-9);
      CHECK(std::abs(wrap_angle(quat_to_yaw(q.qz, q.qw) - phi)) < 1e-9);
    }
    CHECK(quat_to_yaw(yaw_to_quat(kPi).qz, yaw_to_quat(kPi).qw) == doctest::Approx(kPi));
  }

  TEST_CASE("wrap_angle keeps pi and maps -pi to pi") {
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
    CHECK(wrap_angle(0.25) == 0.25);
  }

  TEST_CASE("pose normalization canonicalizes the sign") {
    const Pose p = Pose{1.0, 2.0, -0.6, -0.8}.normalized();
    CHECK(p.qw == doctest::Approx(0.8));
    CHECK(p.qz == doctest::Approx(0.6));
    const Pose q = Pose{0.0, 0.0, 3.0, 4.0}.normalized();
    CHECK(q.qz * q.qz + q.qw * q.qw == doctest::Approx(1.0).epsilon(1e-12));
    const Pose half = Pose{0.0, 0.0, -1.0, 0.0}.normalized();
    CHECK(half.qz == 1.0);
  }

  TEST_CASE("kinematic_step straight motion is exact") {
    const VehicleState s = kinematic_step({0, 0, 0, 1}, {0, 0}, 0.1, {});
    CHECK(s.x == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(s.y == 0.0);
    CHECK(s.phi == 0.0);
    CHECK(s.v == 1.0);
  }

  TEST_CASE("kinematic_step rest is a fixed point") {
    const VehicleState s = kinematic_step({0, 0, 0, 0}, {0, 0}, 0.1, {});
    CHECK(s.x == 0.0);
    CHECK(s.y == 0.0);
    CHECK(s.phi == 0.0);
    CHECK(s.v == 0.0);
  }

  TEST_CASE("kinematic_step matches RK4 on a unit-curvature arc") {
    const VehicleParams p;
    const Control u{std::atan(p.wheelbase), 0.0};
    const VehicleState heun = kinematic_step({0, 0, 0, 1}, u, 0.1, p);
    const VehicleState ref = rk4({0, 0, 0, 1}, u, 0.1, p, 1000);
    CHECK(state_error(heun, ref) < 1e-4);
  }

  TEST_CASE("Heun local error is third order") {
    const VehicleParams p;
    const Control u{std::atan(p.wheelbase), 0.0};
    const VehicleState s0{0, 0, 0, 1};
    const double e1 = state_error(kinematic_step(s0, u, 0.1, p), rk4(s0, u, 0.1, p, 2000));
    const double e2 = state_error(kinematic_step(s0, u, 0.05, p), rk4(s0, u, 0.05, p, 2000));
    CHECK(e1 / e2 >= 7.0);
  }

  TEST_CASE("kinematic_step clamps controls and speed") {
    const VehicleParams p;
    const VehicleState s = kinematic_step({0, 0, 0, 0.99}, {2.0, 5.0}, 0.1, p);
    CHECK(s.v <= p.v_max);
    const Control c = clamp_control({2.0, -5.0}, p);
    CHECK(c.delta == p.delta_max);
    CHECK(c.a == -p.a_max);
  }

  TEST_CASE("vehicle params validation") {
    VehicleParams p;
    CHECK_NOTHROW(p.validate());
    p.wheelbase = 0.0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.v_min = 2.0;
    CHECK_THROWS_AS(p.validate(), Error);
  }

  TEST_CASE("footprint axis aligned") {
    VehicleParams p;
    p.length = 0.5;
    p.width = 0.3;
    const auto v = footprint_vertices(Pose{}, p);
    for (const Vec2& c : v) {
      CHECK(std::abs(c.x) == doctest::Approx(0.25));
      CHECK(std::abs(c.y) == doctest::Approx(0.15));
    }
  }

  TEST_CASE("footprint at yaw pi/2 swaps extents") {
    VehicleParams p;
    p.length = 0.5;
    p.width = 0.3;
    for (const Vec2& c : footprint_vertices(Pose::from_yaw(0, 0, kPi / 2), p)) {
      CHECK(std::abs(c.x) == doctest::Approx(0.15));
      CHECK(std::abs(c.y) == doctest::Approx(0.25));
    }
  }

  TEST_CASE("footprint at yaw pi/4 matches an explicit rotation") {
    VehicleParams p;
    p.length = 0.5;
    p.width = 0.3;
    const double c = std::cos(kPi / 4), s = std::sin(kPi / 4);
    const auto v = footprint_vertices(Pose::from_yaw(1.0, -2.0, kPi / 4), p);
    const double local[4][2] = {{0.25, 0.15}, {-0.25, 0.15}, {-0.25, -0.15}, {0.25, -0.15}};
    for (const auto& l : local) {
      const double ex = 1.0 + c * l[0] - s * l[1];
      const double ey = -2.0 + s * l[0] + c * l[1];
      bool found = false;
      for (const Vec2& q : v) found |= std::abs(q.x - ex) < 1e-12 && std::abs(q.y - ey) < 1e-12;
      CHECK(found);
    }
  }

  TEST_CASE("footprint area is rotation invariant") {
    const VehicleParams p;
    const double base = footprint_polygon(Pose{}, p).area();
    CHECK(base == doctest::Approx(p.length * p.width));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int i = 0; i < 200; ++i) {
      CHECK(std::abs(footprint_polygon(Pose::from_yaw(0.3, 0.7, u(rng)), p).area() - base) < 1e-9);
    }
  }

  TEST_CASE("polygon distance") {
    const auto a = ConvexPolygon::rectangle(0, 0, 1, 1);
    const auto b = ConvexPolygon::rectangle(2, 0, 3, 1);
    CHECK(polygon_distance(a, b) == doctest::Approx(1.0));
    CHECK(polygon_distance(a, ConvexPolygon::rectangle(0.5, 0.5, 2, 2)) == 0.0);
    const ConvexPolygon pt{{{4.0, 5.0}}};
    CHECK(polygon_distance(a, pt) == doctest::Approx(5.0));
    CHECK(point_segment_distance({0, 1}, {-1, 0}, {1, 0}) == doctest::Approx(1.0));
    CHECK(segments_intersect({0, 0}, {1, 1}, {0, 1}, {1, 0}));
    CHECK_FALSE(segments_intersect({0, 0}, {1, 0}, {0, 1}, {1, 1}));
  }

  TEST_CASE("fit_to_horizon pads with exact copies and truncates") {
    std::vector<Pose> poses;
    for (int i = 0; i < 30; ++i) poses.push_back(Pose::from_yaw(0.04 * i, 0.0, 0.0));
    CHECK(fit_to_horizon(poses, 128) == 30);
    CHECK(poses.size() == 128);
    for (std::size_t i = 30; i < 128; ++i) CHECK(poses[i] == poses[29]);

    std::vector<Pose> long_run(150);
    for (int i = 0; i < 150; ++i) long_run[i] = Pose::from_yaw(0.01 * i, 0.0, 0.0);
    CHECK(fit_to_horizon(long_run, 128) == 128);
    CHECK(long_run.size() == 128);
    CHECK(long_run.back().x == doctest::Approx(1.27));
  }

  TEST_CASE("trajectory array round trip") {
    Trajectory t;
    t.dt = 0.1;
    for (int i = 0; i < 5; ++i) t.poses.push_back(Pose::from_yaw(i, -i, 0.3 * i));
    const TrajArray a = t.to_array();
    CHECK(a.rows() == 4);
    CHECK(a.cols() == 5);
    const Trajectory back = Trajectory::from_array(a, 0.1);
    for (int i = 0; i < 5; ++i) {
      CHECK(back.poses[i].x == t.poses[i].x);
      CHECK(std::abs(back.poses[i].yaw() - t.poses[i].yaw()) < 1e-12);
    }
  }
}
