#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "diffplan/binary_io.hpp"
#include "diffplan/checkpoint.hpp"
#include "diffplan/compose.hpp"
#include "diffplan/datagen.hpp"
#include "diffplan/error.hpp"
#include "diffplan/evaluate.hpp"
#include "diffplan/planner.hpp"
#include "diffplan/scene.hpp"
#include "diffplan/svg_plot.hpp"
#include "diffplan/train.hpp"
#include "json.hpp"

#ifndef DIFFPLAN_VERSION
#define DIFFPLAN_VERSION "0.0.0"
#endif

namespace diffplan::cli {

namespace {

using nlohmann::ordered_json;

std::uint64_t hash_text(const std::string& s) { return sim::fnv1a64(s.data(), s.size()); }

std::string hex(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex << v;
  return o.str();
}

Pose parse_pose(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw Error(ErrorCode::kConfigValidation, "pose '" + text + "' must be x,y,phi");
    }
  }
  if (v.size() != 3) throw Error(ErrorCode::kConfigValidation, "pose '" + text + "' must be x,y,phi");
  return Pose::from_yaw(v[0], v[1], v[2]);
}

ordered_json versions() {
  return {{"diffplan", DIFFPLAN_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"cli11", CLI11_VERSION}};
}

ordered_json file_record(const std::string& path) {
  return {{"path", path}, {"fnv1a64", hex(hash_text(io::read_file(path)))}};
}

void write_manifest(const std::string& artifact, const std::string& subcommand, const std::vector<std::string>& args,
                    std::uint64_t seed, const ordered_json& config, const ordered_json& inputs,
                    const ordered_json& outputs) {
  ordered_json m;
  m["subcommand"] = subcommand;
  m["versions"] = versions();
  m["argv"] = args;
  m["seed"] = seed;
  m["config"] = config;
  m["config_hash"] = hex(hash_text(config.dump()));
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  io::write_file(artifact + ".manifest.json", m.dump(2) + "\n");
}

ordered_json mpc_json(const datagen::MpcConfig& c) {
  auto diag3 = [](const Eigen::Matrix3d& m) { return std::vector<double>{m(0, 0), m(1, 1), m(2, 2)}; };
  auto diag2 = [](const Eigen::Matrix2d& m) { return std::vector<double>{m(0, 0), m(1, 1)}; };
  return {{"horizon", c.horizon}, {"ts", c.ts},       {"v_ref", c.v_ref},         {"q1", diag3(c.q1)},
          {"q2", diag3(c.q2)},    {"r1", diag2(c.r1)}, {"r2", diag2(c.r2)},         {"alpha", c.alpha},
          {"gamma", c.gamma},     {"grad_tol", c.grad_tol}, {"max_iterations", c.max_iterations}};
}

ordered_json filter_json(const filter::FilterConfig& f, bool enabled) {
  return {{"enabled", enabled}, {"n_filter", f.n_filter}, {"n_retry", f.n_retry},
          {"omega", f.omega},   {"v_inf", f.v_inf},       {"dt", f.dt}};
}

ordered_json sampler_json(const diffusion::SamplerConfig& s) {
  return {{"kind", s.kind == diffusion::SamplerKind::kDdim ? "ddim" : "ddpm"},
          {"ddim_steps", s.ddim_steps},
          {"clip_denoised", s.clip_denoised},
          {"dt", s.dt}};
}

ordered_json trajectory_json(const Trajectory& t) {
  ordered_json poses = ordered_json::array();
  for (const Pose& p : t.poses) poses.push_back({p.x, p.y, p.qz, p.qw});
  return {{"dt", t.dt}, {"poses", poses}};
}

std::shared_ptr<const diffusion::Denoiser> load_model(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kFileNotFound, "checkpoint not found: " + path);
  diffusion::Checkpoint ck = diffusion::load_checkpoint(path);
  return std::make_shared<diffusion::LearnedDenoiser>(std::move(ck.model));
}

sim::SceneSpec load_scene_checked(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kFileNotFound, "scene not found: " + path);
  return sim::load_scene(path);
}

std::optional<ObstacleTrack> obstacle_from(const std::string& ref, const sim::SceneSpec& scene, double dt, int horizon) {
  if (ref == "none") return std::nullopt;
  constexpr std::string_view kPrefix = "dynamic:";
  if (ref.rfind(kPrefix, 0) != 0) throw Error(ErrorCode::kConfigValidation, "obstacle must be none or dynamic:<k>");
  std::size_t k = 0;
  try {
    k = std::stoul(ref.substr(kPrefix.size()));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfigValidation, "bad obstacle reference '" + ref + "'");
  }
  if (k >= scene.dynamic.size()) throw Error(ErrorCode::kConfigValidation, "scene has no dynamic obstacle " + ref);
  return scene.dynamic[k].sample(dt, horizon);
}

// Planner options shared by plan and eval.
struct PlanFlags {
  std::string ckpt;
  std::string compose;
  std::string obstacle = "none";
  std::string sampler = "ddim";
  int ddim_steps = 8;
  int n_filter = 8;
  int retries = 5;
  bool no_filter = false;
  bool no_clip = false;

  void add(CLI::App* app) {
    app->add_option("--ckpt", ckpt, "Checkpoint of a single model");
    app->add_option("--compose", compose, "Composition config (JSON)");
    app->add_option("--obstacle", obstacle, "Obstacle conditioning for --ckpt: none or dynamic:<k>");
    app->add_option("--sampler", sampler, "ddim or ddpm")->check(CLI::IsMember({"ddim", "ddpm"}));
    app->add_option("--ddim-steps", ddim_steps, "DDIM sub-schedule length");
    app->add_option("--n", n_filter, "Candidates per batch (N_filter)");
    app->add_option("--retries", retries, "Filter retry cap (N_retry)");
    app->add_flag("--no-filter", no_filter, "Return the first candidate without the safety filter");
    app->add_flag("--no-clip", no_clip, "Do not clamp predicted clean trajectories to [-1, 1]");
  }

  diffusion::SamplerConfig sampler_config() const {
    diffusion::SamplerConfig s;
    s.kind = sampler == "ddpm" ? diffusion::SamplerKind::kDdpm : diffusion::SamplerKind::kDdim;
    s.ddim_steps = ddim_steps;
    s.clip_denoised = !no_clip;
    return s;
  }

  planner::PlannerOptions planner_options() const {
    planner::PlannerOptions o;
    o.filter.n_filter = n_filter;
    o.filter.n_retry = retries;
    o.use_filter = !no_filter;
    return o;
  }

  planner::TrajectorySampler build(const sim::SceneSpec& scene, const std::string& planner_spec,
                                   ordered_json& inputs) const {
    std::string c = ckpt;
    std::string m = compose;
    if (!planner_spec.empty()) {
      if (planner_spec.rfind("ckpt:", 0) == 0) c = planner_spec.substr(5);
      else if (planner_spec.rfind("compose:", 0) == 0) m = planner_spec.substr(8);
      else throw Error(ErrorCode::kConfigValidation, "planner spec must be ckpt:<path> or compose:<path>");
    }
    if (c.empty() == m.empty()) throw Error(ErrorCode::kConfigValidation, "give exactly one of a checkpoint or a composition");
    const diffusion::SamplerConfig sc = sampler_config();
    if (!c.empty()) {
      auto model = load_model(c);
      inputs["checkpoint"] = file_record(c);
      return planner::model_sampler(model, obstacle_from(obstacle, scene, sc.dt, model->horizon()), sc);
    }
    if (!std::filesystem::exists(m)) throw Error(ErrorCode::kFileNotFound, "composition config not found: " + m);
    const compose::CompositionConfig cfg = compose::load_composition_config(m);
    inputs["composition"] = file_record(m);
    const std::filesystem::path base = std::filesystem::path(m).parent_path();
    ordered_json members = ordered_json::array();
    const compose::ModelLoader loader = [&](const std::string& p) {
      const std::filesystem::path fp = std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base / p;
      members.push_back(file_record(fp.string()));
      return load_model(fp.string());
    };
    compose::CompositionSpec spec = compose::build_composition(cfg, scene, sc.dt, loader);
    inputs["members"] = members;
    return planner::composed_sampler(std::move(spec), sc);
  }
};

int run_gen_data(const std::vector<std::string>& args, const std::string& scene_path, const std::string& out_path,
                 std::size_t n_starts, std::uint64_t seed, double jitter, int horizon, int jobs, std::ostream& out) {
  const sim::SceneSpec scene = load_scene_checked(scene_path);
  if (!scene.goal) throw Error(ErrorCode::kConfigValidation, "scene has no goal pose");
  const datagen::MpcConfig mpc = datagen::mpc_config_for_scene(scene, {});
  datagen::RolloutOptions ro;
  ro.horizon = horizon;
  const std::vector<Pose> starts = datagen::sample_starts(scene, n_starts, seed, ro.planner);
  std::vector<sim::SceneSpec> variants;
  if (jitter > 0.0) variants = datagen::jitter_dynamic_obstacles(scene, starts.size(), jitter, seed + 1);
  const datagen::BuildResult res =
      datagen::build_dataset(scene, variants, starts, *scene.goal, mpc, VehicleParams{}, ro, jobs);
  if (res.dataset.demos.empty()) throw Error(ErrorCode::kNoPath, "no demonstration succeeded");
  io::save_dataset(res.dataset, out_path);

  ordered_json failures = ordered_json::array();
  for (const auto& f : res.failures) failures.push_back({{"start_index", f.start_index}, {"message", f.message}});
  const ordered_json config = {{"starts", n_starts},   {"obstacle_jitter", jitter}, {"horizon", horizon},
                               {"dt", ro.dt},          {"goal_tolerance", ro.goal_tolerance},
                               {"max_time", ro.max_time}, {"mpc", mpc_json(mpc)}};
  write_manifest(out_path, "gen-data", args, seed, config, {{"scene", file_record(scene_path)}},
                 {{"dataset", file_record(out_path)},
                  {"demonstrations", res.dataset.demos.size()},
                  {"failures", failures}});
  out << ordered_json{{"dataset", out_path},
                      {"demonstrations", res.dataset.demos.size()},
                      {"failures", res.failures.size()}}
             .dump()
      << "\n";
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diffusion trajectory planning toolkit"};
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "Worker thread cap")->check(CLI::PositiveNumber);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate MPC demonstrations for a scene");
  std::string scene_path, out_path, data_path, report_path, start_text, goal_text, explain_path;
  std::size_t n_starts = 50;
  std::uint64_t seed = 0;
  double jitter = 0.0;
  int horizon = kDefaultHorizon;
  gen->add_option("--scene", scene_path, "Scene file")->required();
  gen->add_option("--out", out_path, "Dataset output file")->required();
  gen->add_option("--starts", n_starts, "Number of sampled start poses");
  gen->add_option("--seed", seed, "Random seed");
  gen->add_option("--obstacle-jitter", jitter, "Per-demo shift range of dynamic obstacle starts (m)");
  gen->add_option("--horizon", horizon, "Trajectory length L");

  // train
  auto* tr = app.add_subcommand("train", "Train a diffusion model on a dataset");
  diffusion::TrainConfig tcfg;
  std::string norm_bounds;
  tr->add_option("--data", data_path, "Dataset file")->required();
  tr->add_option("--out", out_path, "Checkpoint output file")->required();
  tr->add_option("--seed", seed, "Random seed");
  tr->add_option("--iterations", tcfg.iterations, "Optimizer steps");
  tr->add_option("--batch", tcfg.batch_size, "Minibatch size");
  tr->add_option("--lr", tcfg.learning_rate, "Adam learning rate");
  tr->add_option("--ema", tcfg.ema_decay, "EMA decay of the exported weights");
  tr->add_option("--p-uncond", tcfg.p_uncond, "Obstacle dropout probability");
  tr->add_option("--channels", tcfg.net.base_channels, "Base channel count");
  tr->add_option("--mid-channels", tcfg.net.mid_channels, "Bottleneck channel count");
  tr->add_option("--norm-bounds", norm_bounds, "Map-frame normalization W,H instead of dataset min-max");

  // plan
  auto* pl = app.add_subcommand("plan", "Plan one trajectory");
  PlanFlags pf;
  bool explain = false;
  pl->add_option("--scene", scene_path, "Scene file")->required();
  pl->add_option("--start", start_text, "Start pose x,y,phi")->required();
  pl->add_option("--goal", goal_text, "Goal pose x,y,phi (default: scene goal)");
  pl->add_option("--seed", seed, "Random seed");
  pl->add_option("--out", out_path, "Trajectory output (JSON); stdout when omitted");
  pl->add_flag("--explain", explain, "Emit per-candidate filter diagnostics");
  pl->add_option("--explain-out", explain_path, "Write diagnostics to this file instead of stdout");
  pf.add(pl);

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a planner over sampled starts");
  PlanFlags ef;
  std::string planner_spec, baseline_path, tracker = "pure-pursuit";
  ev->add_option("--scene", scene_path, "Scene file")->required();
  ev->add_option("--planner", planner_spec, "ckpt:<path> or compose:<path>");
  ev->add_option("--starts", n_starts, "Number of start poses");
  ev->add_option("--seed", seed, "Seed for starts and sampling");
  ev->add_option("--report", report_path, "Report output (JSON)")->required();
  ev->add_option("--baseline", baseline_path, "Baseline report for M.RP");
  ev->add_option("--tracker", tracker, "pure-pursuit or mpc")->check(CLI::IsMember({"pure-pursuit", "mpc"}));
  ef.add(ev);

  // plot
  auto* pt = app.add_subcommand("plot", "Render a report as SVG");
  pt->add_option("--report", report_path, "Report file")->required();
  pt->add_option("--out", out_path, "SVG output")->required();
  pt->add_option("--scene", scene_path, "Scene drawn underneath");

  auto error_record = [&](const std::string& code, const std::string& msg, std::optional<std::uint64_t> offset) {
    ordered_json e{{"error", code}, {"message", msg}};
    if (offset) e["offset"] = *offset;
    err << e.dump() << "\n";
  };

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    error_record("usage", e.what(), std::nullopt);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return run_gen_data(args, scene_path, out_path, n_starts, seed, jitter, horizon, jobs, out);
    }

    if (tr->parsed()) {
      if (!std::filesystem::exists(data_path)) throw Error(ErrorCode::kFileNotFound, "dataset not found: " + data_path);
      const datagen::Dataset ds = io::load_dataset(data_path);
      tcfg.net.horizon = ds.horizon;
      if (!norm_bounds.empty()) {
        const auto comma = norm_bounds.find(',');
        if (comma == std::string::npos) throw Error(ErrorCode::kConfigValidation, "--norm-bounds expects W,H");
        try {
          tcfg.norm = diffusion::NormStats::from_bounds(std::stod(norm_bounds.substr(0, comma)),
                                                         std::stod(norm_bounds.substr(comma + 1)));
        } catch (const std::logic_error&) {
          throw Error(ErrorCode::kConfigValidation, "--norm-bounds expects W,H");
        }
      }
      std::ostringstream curve;
      curve << "iteration,loss\n";
      const diffusion::TrainResult res = diffusion::train(ds, tcfg, seed, [&](const diffusion::TrainProgress& p) {
        curve << p.iteration << ',' << p.loss << "\n";
        err << "iteration " << p.iteration << " loss " << p.loss << "\n";
      });
      diffusion::Checkpoint ck{res.model, res.config_hash, seed};
      diffusion::save_checkpoint(ck, out_path);
      io::write_file(out_path + ".curve.csv", curve.str());
      write_manifest(out_path, "train", args, seed, ordered_json::parse(tcfg.canonical_json()),
                     {{"dataset", file_record(data_path)}},
                     {{"checkpoint", file_record(out_path)},
                      {"curve", out_path + ".curve.csv"},
                      {"parameters", res.model.net().num_params()},
                      {"final_loss", res.curve.empty() ? 0.0 : res.curve.back().loss}});
      out << ordered_json{{"checkpoint", out_path},
                          {"parameters", res.model.net().num_params()},
                          {"final_loss", res.curve.empty() ? 0.0 : res.curve.back().loss}}
                 .dump()
          << "\n";
      return kExitOk;
    }

    if (pl->parsed()) {
      const sim::SceneSpec scene = load_scene_checked(scene_path);
      const Pose start = parse_pose(start_text);
      Pose goal;
      if (!goal_text.empty()) goal = parse_pose(goal_text);
      else if (scene.goal) goal = *scene.goal;
      else throw Error(ErrorCode::kConfigValidation, "no goal given and the scene has none");
      ordered_json inputs{{"scene", file_record(scene_path)}};
      const planner::DiffusionPlanner planner(pf.build(scene, "", inputs), scene, pf.planner_options());
      const planner::PlanOutcome res = planner.plan(start, goal, seed);
      if (explain) {
        const std::string text = filter::explain(res.selection);
        if (explain_path.empty()) out << text;
        else io::write_file(explain_path, text);
      }
      if (!res.trajectory) {
        error_record("planner_empty", "no candidate passed the safety filter", std::nullopt);
        return kExitPlannerEmpty;
      }
      ordered_json result = trajectory_json(*res.trajectory);
      result["batches"] = res.batches;
      result["eps_evaluations"] = res.eps_evaluations;
      if (out_path.empty()) {
        out << result.dump() << "\n";
      } else {
        io::write_file(out_path, result.dump(1) + "\n");
        write_manifest(out_path, "plan", args, seed,
                       {{"sampler", sampler_json(pf.sampler_config())},
                        {"filter", filter_json(pf.planner_options().filter, !pf.no_filter)},
                        {"obstacle", pf.obstacle}},
                       inputs, {{"trajectory", file_record(out_path)}});
      }
      return kExitOk;
    }

    if (ev->parsed()) {
      const sim::SceneSpec scene = load_scene_checked(scene_path);
      if (!scene.goal) throw Error(ErrorCode::kConfigValidation, "scene has no goal pose");
      ordered_json inputs{{"scene", file_record(scene_path)}};
      const planner::DiffusionPlanner planner(ef.build(scene, planner_spec, inputs), scene, ef.planner_options());
      const std::vector<Pose> starts = datagen::sample_starts(scene, n_starts, seed);
      const Pose goal = *scene.goal;
      const sim::PlannerFn fn = [&](const Pose& s, std::size_t i) {
        const planner::PlanOutcome r = planner.plan(s, goal, planner::attempt_seed(seed, static_cast<int>(i) + 1000));
        return sim::PlanAttempt{r.trajectory, r.batches, r.eps_evaluations};
      };
      sim::EvalConfig ecfg;
      ecfg.tracker = tracker == "mpc" ? sim::Tracker::kMpc : sim::Tracker::kPurePursuit;
      const std::string name = planner_spec.empty() ? (ef.ckpt.empty() ? "compose:" + ef.compose : "ckpt:" + ef.ckpt)
                                                    : planner_spec;
      sim::EvalReport report = sim::evaluate(fn, scene, starts, ecfg, name);
      if (!baseline_path.empty()) {
        if (!std::filesystem::exists(baseline_path))
          throw Error(ErrorCode::kFileNotFound, "baseline report not found: " + baseline_path);
        const sim::EvalReport base = sim::report_from_json(io::read_file(baseline_path));
        report.baseline = base.planner;
        report.m_rp = sim::relative_reduction(base.plan_time.mean, report.plan_time.mean);
        inputs["baseline"] = file_record(baseline_path);
      }
      io::write_file(report_path, sim::report_to_json(report));
      write_manifest(report_path, "eval", args, seed,
                     {{"starts", n_starts},
                      {"tracker", tracker},
                      {"sampler", sampler_json(ef.sampler_config())},
                      {"filter", filter_json(ef.planner_options().filter, !ef.no_filter)},
                      {"obstacle", ef.obstacle},
                      {"danger_threshold", ecfg.danger_threshold},
                      {"deadline", ecfg.deadline}},
                     inputs, {{"report", report_path}});
      ordered_json summary{{"report", report_path},  {"runs", report.runs_total},
                           {"f_rate", report.f_rate}, {"c_rate", report.c_rate},
                           {"danger", report.danger}, {"ct_mean", report.plan_time.mean},
                           {"mte_mean", report.tracking_error.mean}};
      if (report.m_rp) summary["m_rp"] = *report.m_rp;
      out << summary.dump() << "\n";
      return kExitOk;
    }

    if (pt->parsed()) {
      if (!std::filesystem::exists(report_path))
        throw Error(ErrorCode::kFileNotFound, "report not found: " + report_path);
      const sim::EvalReport report = sim::report_from_json(io::read_file(report_path));
      std::optional<sim::SceneSpec> scene;
      if (!scene_path.empty()) scene = load_scene_checked(scene_path);
      io::write_file(out_path, sim::render_report_svg(report, scene ? &*scene : nullptr));
      out << ordered_json{{"svg", out_path}}.dump() << "\n";
      return kExitOk;
    }
  } catch (const FormatError& e) {
    error_record(to_string(e.code()), e.what(), e.offset());
    return kExitData;
  } catch (const Error& e) {
    error_record(to_string(e.code()), e.what(), std::nullopt);
    return kExitData;
  } catch (const std::exception& e) {
    error_record("internal", e.what(), std::nullopt);
    return kExitData;
  }
  error_record("usage", "no subcommand given", std::nullopt);
  return kExitUsage;
}

}  // namespace diffplan::cli
