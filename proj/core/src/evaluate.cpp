#include "diffplan/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "diffplan/error.hpp"
#include "json.hpp"

namespace diffplan::sim {

Stats summarize(const std::vector<double>& values) {
  Stats s;
  if (values.empty()) return s;
  s.max = *std::max_element(values.begin(), values.end());
  s.min = *std::min_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

double relative_reduction(double baseline_mean, double candidate_mean) {
  if (!(baseline_mean > 0.0)) throw_invalid("baseline computation time must be positive");
  return (baseline_mean - candidate_mean) / baseline_mean;
}

EvalReport aggregate(std::vector<RunRecord> runs, const std::string& planner_name, const std::string& scene_name) {
  EvalReport r;
  r.planner = planner_name;
  r.scene = scene_name;
  r.runs_total = runs.size();
  std::vector<double> times, errors, clear;
  std::size_t danger = 0;
  std::size_t points = 0;
  for (const RunRecord& run : runs) {
    if (run.failed) {
      ++r.failures;
      continue;
    }
    if (run.collided) ++r.collisions;
    times.push_back(run.plan_time);
    errors.push_back(run.tracking_error);
    clear.push_back(run.min_clearance);
    danger += run.danger_points;
    points += run.total_points;
  }
  if (r.runs_total > 0) {
    const auto n = static_cast<double>(r.runs_total);
    r.f_rate = static_cast<double>(r.failures) / n;
    r.c_rate = static_cast<double>(r.failures + r.collisions) / n;
  }
  r.danger = points > 0 ? static_cast<double>(danger) / static_cast<double>(points) : 0.0;
  r.plan_time = summarize(times);
  r.tracking_error = summarize(errors);
  r.min_clearance = summarize(clear);
  r.runs = std::move(runs);
  return r;
}

EvalReport evaluate(const PlannerFn& planner, const SceneSpec& scene, const std::vector<Pose>& starts,
                    const EvalConfig& cfg, const std::string& planner_name) {
  const CollisionWorld world(scene);
  std::vector<RunRecord> runs;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    RunRecord rec;
    rec.start_index = i;
    rec.start = starts[i];
    const auto t0 = std::chrono::steady_clock::now();
    PlanAttempt attempt = planner(starts[i], i);
    rec.plan_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.batches = attempt.batches;
    rec.eps_evaluations = attempt.eps_evaluations;
    if (!attempt.trajectory || rec.plan_time > cfg.deadline) {
      rec.failed = true;
      runs.push_back(std::move(rec));
      continue;
    }
    const Trajectory& plan = *attempt.trajectory;
    TrackResult tr = cfg.tracker == Tracker::kMpc ? mpc_track(plan, cfg.vehicle, cfg.mpc)
                                                   : pure_pursuit_track(plan, cfg.vehicle, cfg.pure_pursuit);
    const CollisionCheck cc = collision_during_tracking(tr.states, plan.dt, world, cfg.vehicle);
    rec.collided = cc.collided || tr.solver_failed;
    rec.collision_index = cc.first_index;
    rec.tracking_error = tr.mean_error;
    rec.total_points = cc.clearance.size();
    rec.min_clearance = std::numeric_limits<double>::infinity();
    for (double c : cc.clearance) {
      if (c < cfg.danger_threshold) ++rec.danger_points;
      rec.min_clearance = std::min(rec.min_clearance, c);
    }
    if (cc.clearance.empty()) rec.min_clearance = 0.0;
    if (cfg.keep_trajectories) {
      rec.plan = plan;
      rec.executed = std::move(tr.states);
    }
    runs.push_back(std::move(rec));
  }
  return aggregate(std::move(runs), planner_name, scene.name);
}

namespace {

using nlohmann::ordered_json;

ordered_json stats_json(const Stats& s) {
  return {{"max", s.max}, {"min", s.min}, {"mean", s.mean}, {"std", s.std}};
}

Stats stats_from(const nlohmann::json& j) {
  return {j.at("max").get<double>(), j.at("min").get<double>(), j.at("mean").get<double>(),
          j.at("std").get<double>()};
}

double finite_or_zero(double v) { return std::isfinite(v) ? v : 0.0; }

}  // namespace

std::string report_to_json(const EvalReport& r) {
  ordered_json j;
  j["planner"] = r.planner;
  j["scene"] = r.scene;
  j["runs_total"] = r.runs_total;
  j["failures"] = r.failures;
  j["collisions"] = r.collisions;
  j["f_rate"] = r.f_rate;
  j["c_rate"] = r.c_rate;
  j["danger"] = r.danger;
  j["plan_time"] = stats_json(r.plan_time);
  j["tracking_error"] = stats_json(r.tracking_error);
  j["min_clearance"] = stats_json(r.min_clearance);
  if (r.baseline) j["baseline"] = *r.baseline;
  if (r.m_rp) j["m_rp"] = *r.m_rp;
  j["runs"] = ordered_json::array();
  for (const RunRecord& run : r.runs) {
    ordered_json jr;
    jr["start_index"] = run.start_index;
    jr["start"] = {run.start.x, run.start.y, run.start.qz, run.start.qw};
    jr["failed"] = run.failed;
    jr["collided"] = run.collided;
    jr["collision_index"] = run.collision_index;
    jr["plan_time"] = run.plan_time;
    jr["tracking_error"] = run.tracking_error;
    jr["danger_points"] = run.danger_points;
    jr["total_points"] = run.total_points;
    jr["min_clearance"] = finite_or_zero(run.min_clearance);
    jr["batches"] = run.batches;
    jr["eps_evaluations"] = run.eps_evaluations;
    if (run.plan) {
      jr["dt"] = run.plan->dt;
      ordered_json poses = ordered_json::array();
      for (const Pose& p : run.plan->poses) poses.push_back({p.x, p.y, p.qz, p.qw});
      jr["plan"] = std::move(poses);
    }
    if (!run.executed.empty()) {
      ordered_json states = ordered_json::array();
      for (const VehicleState& s : run.executed) states.push_back({s.x, s.y, s.phi, s.v});
      jr["executed"] = std::move(states);
    }
    j["runs"].push_back(std::move(jr));
  }
  return j.dump(1) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("report is not valid JSON: ") + e.what(), e.byte);
  }
  EvalReport r;
  try {
    r.planner = j.at("planner").get<std::string>();
    r.scene = j.at("scene").get<std::string>();
    r.runs_total = j.at("runs_total").get<std::size_t>();
    r.failures = j.at("failures").get<std::size_t>();
    r.collisions = j.at("collisions").get<std::size_t>();
    r.f_rate = j.at("f_rate").get<double>();
    r.c_rate = j.at("c_rate").get<double>();
    r.danger = j.at("danger").get<double>();
    r.plan_time = stats_from(j.at("plan_time"));
    r.tracking_error = stats_from(j.at("tracking_error"));
    r.min_clearance = stats_from(j.at("min_clearance"));
    if (j.contains("baseline")) r.baseline = j.at("baseline").get<std::string>();
    if (j.contains("m_rp")) r.m_rp = j.at("m_rp").get<double>();
    for (const auto& jr : j.at("runs")) {
      RunRecord run;
      run.start_index = jr.at("start_index").get<std::size_t>();
      const auto st = jr.at("start").get<std::vector<double>>();
      if (st.size() != 4) throw FormatError("start pose needs 4 values", 0);
      run.start = {st[0], st[1], st[2], st[3]};
      run.failed = jr.at("failed").get<bool>();
      run.collided = jr.at("collided").get<bool>();
      run.collision_index = jr.at("collision_index").get<std::size_t>();
      run.plan_time = jr.at("plan_time").get<double>();
      run.tracking_error = jr.at("tracking_error").get<double>();
      run.danger_points = jr.at("danger_points").get<std::size_t>();
      run.total_points = jr.at("total_points").get<std::size_t>();
      run.min_clearance = jr.at("min_clearance").get<double>();
      run.batches = jr.at("batches").get<int>();
      run.eps_evaluations = jr.at("eps_evaluations").get<std::uint64_t>();
      if (jr.contains("plan")) {
        Trajectory t;
        t.dt = jr.at("dt").get<double>();
        for (const auto& p : jr.at("plan")) {
          const auto v = p.get<std::vector<double>>();
          if (v.size() != 4) throw FormatError("plan pose needs 4 values", 0);
          t.poses.push_back({v[0], v[1], v[2], v[3]});
        }
        run.plan = std::move(t);
      }
      if (jr.contains("executed")) {
        for (const auto& s : jr.at("executed")) {
          const auto v = s.get<std::vector<double>>();
          if (v.size() != 4) throw FormatError("executed state needs 4 values", 0);
          run.executed.push_back({v[0], v[1], v[2], v[3]});
        }
      }
      r.runs.push_back(std::move(run));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFileFormat, std::string("malformed report: ") + e.what());
  }
  return r;
}

}  // namespace diffplan::sim
