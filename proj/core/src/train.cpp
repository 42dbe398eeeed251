#include "diffplan/train.hpp"

#include <cmath>

#include "json.hpp"

#include "diffplan/error.hpp"
#include "diffplan/scene.hpp"

namespace diffplan::diffusion {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfigValidation, what); };
  if (diffusion_steps < 1) fail("diffusion_steps must be >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) fail("need 0 < beta_min <= beta_max < 1");
  if (iterations < 0) fail("iterations must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(grad_clip > 0.0)) fail("grad_clip must be positive");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) fail("ema_decay must lie in [0, 1)");
  if (!(p_uncond >= 0.0 && p_uncond <= 1.0)) fail("p_uncond must lie in [0, 1]");
  try {
    net.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

std::string TrainConfig::canonical_json() const {
  const nlohmann::ordered_json j = {
      {"diffusion_steps", diffusion_steps},
      {"beta_min", beta_min},
      {"beta_max", beta_max},
      {"net",
       {{"horizon", net.horizon},
        {"base_channels", net.base_channels},
        {"mid_channels", net.mid_channels},
        {"kernel", net.kernel},
        {"time_dim", net.time_dim},
        {"embed_dim", net.embed_dim},
        {"groups", net.groups}}},
      {"iterations", iterations},
      {"batch_size", batch_size},
      {"learning_rate", learning_rate},
      {"grad_clip", grad_clip},
      {"ema_decay", ema_decay},
      {"p_uncond", p_uncond},
  };
  nlohmann::ordered_json out = j;
  if (norm) out["norm"] = {{"lo", norm->lo}, {"hi", norm->hi}};
  return out.dump();
}

std::uint64_t TrainConfig::hash() const {
  const std::string text = canonical_json();
  return sim::fnv1a64(text.data(), text.size());
}

Conditioning demo_conditioning(const datagen::Demonstration& demo) {
  if (demo.traj.poses.empty()) throw_invalid("demonstration has no poses");
  Conditioning c;
  c.start = demo.traj.poses.front();
  c.goal = demo.traj.poses.back();
  c.obstacle = demo.obstacle;
  c.cond_mask = true;
  return c;
}

template <typename S>
TrainBatch<S> draw_batch(const datagen::Dataset& ds, const NormStats& norm, const NoiseSchedule& sched,
                         int batch_size, double p_uncond, std::mt19937_64& rng) {
  if (ds.demos.empty()) throw_invalid("training needs a non-empty dataset");
  std::uniform_int_distribution<std::size_t> pick(0, ds.demos.size() - 1);
  std::uniform_int_distribution<int> step(1, sched.steps);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<TrajArray> xs;
  std::vector<int> ts;
  std::vector<Conditioning> conds;
  TrajArray eps_all(kPoseChannels, static_cast<Eigen::Index>(batch_size) * ds.horizon);
  for (int b = 0; b < batch_size; ++b) {
    const datagen::Demonstration& d = ds.demos[pick(rng)];
    const int t = step(rng);
    Conditioning c = demo_conditioning(d);
    if (unit(rng) < p_uncond) c.cond_mask = false;
    TrajArray eps(kPoseChannels, ds.horizon);
    for (Eigen::Index j = 0; j < eps.cols(); ++j)
      for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, j) = gauss(rng);
    xs.push_back(q_sample(norm.normalize(d.traj.to_array()), t, eps, sched));
    eps_all.middleCols(static_cast<Eigen::Index>(b) * ds.horizon, ds.horizon) = eps;
    ts.push_back(t);
    conds.push_back(std::move(c));
  }
  std::vector<const Conditioning*> ptrs;
  for (const Conditioning& c : conds) ptrs.push_back(&c);
  TrainBatch<S> out;
  out.inputs = make_inputs<S>(xs, ts, ptrs, norm);
  out.eps = eps_all.cast<S>();
  return out;
}

template TrainBatch<float> draw_batch<float>(const datagen::Dataset&, const NormStats&, const NoiseSchedule&, int,
                                             double, std::mt19937_64&);
template TrainBatch<double> draw_batch<double>(const datagen::Dataset&, const NormStats&, const NoiseSchedule&, int,
                                               double, std::mt19937_64&);

TrainResult train(const datagen::Dataset& ds, const TrainConfig& cfg, std::uint64_t seed,
                  const std::function<void(const TrainProgress&)>& on_log) {
  cfg.validate();
  ds.validate();
  if (ds.demos.empty()) throw_invalid("training needs a non-empty dataset");
  if (ds.horizon != cfg.net.horizon)
    throw Error(ErrorCode::kConfigValidation, "dataset horizon differs from the network horizon");

  const NoiseSchedule sched = make_schedule(cfg.diffusion_steps, cfg.beta_min, cfg.beta_max);
  const NormStats norm = cfg.norm ? *cfg.norm : NormStats::from_dataset(ds);
  TrainResult result{LearnedDenoiser(cfg.net, sched, norm), {}, cfg.hash()};
  TemporalUnet<float> net(cfg.net);
  net.init(seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<float>& w = net.params();
  std::vector<float>& g = net.grads();
  std::vector<float> ema = w;
  std::vector<double> m(w.size(), 0.0);
  std::vector<double> v(w.size(), 0.0);
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kAdamEps = 1e-8;
  double running = 0.0;
  int running_n = 0;

  for (int it = 1; it <= cfg.iterations; ++it) {
    const TrainBatch<float> batch = draw_batch<float>(ds, norm, sched, cfg.batch_size, cfg.p_uncond, rng);
    net.zero_grad();
    const double loss = loss_and_grad(net, batch.inputs, batch.eps);
    if (!std::isfinite(loss))
      throw Error(ErrorCode::kTrainingDiverged, "non-finite training loss at iteration " + std::to_string(it));

    double gnorm2 = 0.0;
    for (float gi : g) gnorm2 += static_cast<double>(gi) * gi;
    const double gnorm = std::sqrt(gnorm2);
    if (!std::isfinite(gnorm))
      throw Error(ErrorCode::kTrainingDiverged, "non-finite gradient at iteration " + std::to_string(it));
    const double clip = gnorm > cfg.grad_clip ? cfg.grad_clip / gnorm : 1.0;
    const double bc1 = 1.0 - std::pow(kBeta1, it);
    const double bc2 = 1.0 - std::pow(kBeta2, it);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * clip;
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
      w[i] = static_cast<float>(w[i] - cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEps));
      ema[i] = static_cast<float>(cfg.ema_decay * ema[i] + (1.0 - cfg.ema_decay) * w[i]);
    }

    running += loss;
    ++running_n;
    if (cfg.log_every > 0 && (it % cfg.log_every == 0 || it == cfg.iterations)) {
      const TrainProgress p{it, running / running_n};
      result.curve.push_back(p);
      if (on_log) on_log(p);
      running = 0.0;
      running_n = 0;
    }
  }

  result.model.net() = net;
  result.model.net().params() = cfg.iterations > 0 ? ema : w;
  result.model.net().zero_grad();
  return result;
}

}  // namespace diffplan::diffusion
