#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "diffplan/denoiser.hpp"
#include "diffplan/mpc.hpp"
#include "diffplan/network.hpp"
#include "diffplan/safety_filter.hpp"
#include "diffplan/sampler.hpp"

using namespace diffplan;

namespace {

std::vector<Trajectory> candidate_batch(int n, int horizon) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  std::vector<Trajectory> batch;
  for (int i = 0; i < n; ++i) {
    Trajectory t;
    double x = 1.0, y = 1.0, phi = u(rng);
    for (int k = 0; k < horizon; ++k) {
      t.poses.push_back(Pose::from_yaw(x, y, phi));
      phi += 0.05 * u(rng);
      x += 0.03 * std::cos(phi);
      y += 0.03 * std::sin(phi);
    }
    batch.push_back(std::move(t));
  }
  return batch;
}

sim::SceneSpec toy_like_scene() {
  sim::SceneSpec s;
  s.polygons.push_back(ConvexPolygon::rectangle(2.6, 2.3, 3.1, 3.7));
  s.polygons.push_back(ConvexPolygon::rectangle(1.3, 4.3, 2.1, 4.8));
  s.polygons.push_back(ConvexPolygon::rectangle(1.3, 1.9, 2.1, 2.4));
  sim::DynamicObstacle o;
  o.start = Pose{3.5, 1.2, 1.0, 0.0};
  o.speed = 0.4;
  o.duration = 7.1;
  s.dynamic.push_back(o);
  return s;
}

void BM_ScoreBatch(benchmark::State& state) {
  const auto batch = candidate_batch(8, 128);
  const sim::CollisionWorld world(toy_like_scene());
  const filter::FilterConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(filter::score_batch(batch, world, cfg, VehicleParams{}));
}
BENCHMARK(BM_ScoreBatch)->Unit(benchmark::kMicrosecond);

void BM_DdimSample(benchmark::State& state) {
  diffusion::NetConfig net;
  diffusion::LearnedDenoiser model(net, diffusion::make_schedule(), diffusion::NormStats::from_bounds(6, 6));
  model.net().init(1);
  diffusion::Conditioning c;
  c.start = Pose::from_yaw(1, 1, 0);
  c.goal = Pose::from_yaw(4.9, 3, 0);
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(diffusion::sample(model, c, static_cast<std::size_t>(state.range(0)), {}, ++seed));
}
BENCHMARK(BM_DdimSample)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_MpcSolve(benchmark::State& state) {
  const datagen::MpcConfig cfg;
  datagen::MpcSolver solver(cfg, VehicleParams{});
  datagen::MpcProblem p;
  p.state = {1.0, 1.0, 0.1, 0.3};
  for (int k = 1; k <= cfg.horizon; ++k) p.refs.push_back({1.0 + 0.4 * cfg.ts * k, 1.0, 0.0});
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(p));
}
BENCHMARK(BM_MpcSolve)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
