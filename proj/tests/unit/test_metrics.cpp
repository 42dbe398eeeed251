#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "diffplan/evaluate.hpp"

using namespace diffplan;
using namespace diffplan::sim;

namespace {

RunRecord run(bool failed, bool collided, std::size_t danger = 0, std::size_t total = 0, double time = 0.1) {
  RunRecord r;
  r.failed = failed;
  r.collided = collided;
  r.danger_points = danger;
  r.total_points = total;
  r.plan_time = time;
  return r;
}

std::vector<Pose> starts(int n) {
  std::vector<Pose> s;
  for (int i = 0; i < n; ++i) s.push_back(Pose::from_yaw(1.0, 1.0 + 0.5 * i, 0.0));
  return s;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("fail, collide, clean gives 1/3 and 2/3") {
    const EvalReport r = aggregate({run(true, false), run(false, true, 0, 10), run(false, false, 0, 10)}, "p", "s");
    CHECK(r.runs_total == 3);
    CHECK(r.failures == 1);
    CHECK(r.collisions == 1);
    CHECK(r.f_rate == 1.0 / 3.0);
    CHECK(r.c_rate == 2.0 / 3.0);
    CHECK(r.c_rate * 3.0 == static_cast<double>(r.failures + r.collisions));
  }

  TEST_CASE("a collision in a failed run is not double counted") {
    const EvalReport r = aggregate({run(true, true), run(false, false, 0, 4)}, "p", "s");
    CHECK(r.failures == 1);
    CHECK(r.collisions == 0);
    CHECK(r.c_rate == 0.5);
  }

  TEST_CASE("danger counts executed points of non-failed runs") {
    const EvalReport r =
        aggregate({run(false, false, 2, 10), run(false, true, 0, 10), run(true, false, 5, 5)}, "p", "s");
    CHECK(r.danger == 2.0 / 20.0);
    CHECK(aggregate({}, "p", "s").danger == 0.0);
  }

  TEST_CASE("timing statistics use the population deviation over non-failed runs") {
    const EvalReport r = aggregate(
        {run(false, false, 0, 1, 1.0), run(false, false, 0, 1, 2.0), run(false, false, 0, 1, 3.0),
         run(false, false, 0, 1, 4.0), run(true, false, 0, 0, 100.0)},
        "p", "s");
    CHECK(r.plan_time.mean == 2.5);
    CHECK(r.plan_time.max == 4.0);
    CHECK(r.plan_time.min == 1.0);
    CHECK(r.plan_time.std == std::sqrt(1.25));
  }

  TEST_CASE("relative reduction against a baseline") {
    CHECK(relative_reduction(0.2, 0.1) == 0.5);
    CHECK(relative_reduction(0.4, 0.5) == doctest::Approx(-0.25));
    CHECK(relative_reduction(1.0, 1.0) == 0.0);
    CHECK(relative_reduction(2.699, 1.424) == doctest::Approx(0.4724).epsilon(1e-3));
    CHECK_THROWS_AS(relative_reduction(0.0, 1.0), Error);
  }

  TEST_CASE("a planner that never answers fails every run") {
    EvalConfig cfg;
    const EvalReport r = evaluate([](const Pose&, std::size_t) { return PlanAttempt{}; },
                                  testutil::empty_scene(6, 6), starts(4), cfg, "empty");
    CHECK(r.f_rate == 1.0);
    CHECK(r.c_rate == 1.0);
    CHECK(r.danger == 0.0);
  }

  TEST_CASE("a planner returning safe trajectories never fails or collides") {
    EvalConfig cfg;
    const EvalReport r = evaluate(
        [](const Pose& s, std::size_t) {
          PlanAttempt a;
          a.trajectory = testutil::straight(s.x, s.y, 0.0, 0.04, 40);
          a.batches = 1;
          return a;
        },
        testutil::empty_scene(6, 6), starts(4), cfg, "safe");
    CHECK(r.f_rate == 0.0);
    CHECK(r.c_rate == 0.0);
    CHECK(r.danger == 0.0);
    REQUIRE(r.runs.size() == 4);
    CHECK(r.runs[2].total_points == 40);
    CHECK(r.runs[2].min_clearance == doctest::Approx(1.0 - 0.25));
  }

  TEST_CASE("points near obstacles count as danger") {
    SceneSpec scene = testutil::empty_scene(6, 6);
    // A wall 0.05 m beside the vehicle's flank along its whole path.
    scene.polygons.push_back(ConvexPolygon::rectangle(0.5, 1.19, 5.0, 1.5));
    EvalConfig cfg;
    const EvalReport r = evaluate(
        [](const Pose&, std::size_t) {
          PlanAttempt a;
          a.trajectory = testutil::straight(1.0, 1.0, 0.0, 0.02, 10);
          return a;
        },
        scene, {Pose::from_yaw(1.0, 1.0, 0.0)}, cfg);
    CHECK(r.c_rate == 0.0);
    CHECK(r.runs[0].danger_points == 10);
    CHECK(r.danger == 1.0);
  }

  TEST_CASE("late answers are failures") {
    EvalConfig cfg;
    cfg.deadline = -1.0;
    const EvalReport r = evaluate(
        [](const Pose& s, std::size_t) {
          PlanAttempt a;
          a.trajectory = testutil::straight(s.x, s.y, 0.0, 0.04, 8);
          return a;
        },
        testutil::empty_scene(6, 6), starts(2), cfg);
    CHECK(r.f_rate == 1.0);
  }

  TEST_CASE("report JSON round trip") {
    EvalConfig cfg;
    EvalReport r = evaluate(
        [](const Pose& s, std::size_t i) {
          PlanAttempt a;
          if (i != 1) a.trajectory = testutil::straight(s.x, s.y, 0.0, 0.04, 12);
          a.batches = 2;
          a.eps_evaluations = 128;
          return a;
        },
        testutil::empty_scene(6, 6), starts(3), cfg, "rt");
    r.baseline = "grid";
    r.m_rp = 0.25;
    const std::string text = report_to_json(r);
    const EvalReport back = report_from_json(text);
    CHECK(back.f_rate == r.f_rate);
    CHECK(back.runs.size() == 3);
    CHECK(back.runs[0].plan->size() == 12);
    CHECK(back.m_rp == 0.25);
    CHECK(report_to_json(back) == text);
    CHECK_THROWS_AS(report_from_json("{"), FormatError);
  }
}
