#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "diffplan/sampler.hpp"
#include "diffplan/scene.hpp"

namespace diffplan::compose {

using diffusion::Conditioning;
using diffusion::Denoiser;

struct Member {
  std::shared_ptr<const Denoiser> model;
  Conditioning cond;
  double nu = 1.0;
};

/// Test-time product of conditional models divided by a shared unconditional
/// prediction:
///   eps = nu_uncond * eps_u + sum_i nu_i * (eps_i - eps_u),
/// where eps_u comes from member `uncond_source` with its obstacle masked.
struct CompositionSpec {
  std::vector<Member> members;
  double nu_uncond = 1.0;
  std::size_t uncond_source = 0;

  /// Throws kShapeMismatch when members disagree on horizon, schedule or
  /// normalization, and kConfigValidation for bad weights or indices.
  void validate() const;
  /// Unconditional coefficient after expanding the differences: nu_uncond - sum nu_i.
  double uncond_coefficient() const;
};

/// Terms with a zero coefficient are skipped, and the remaining terms are added
/// per element in ascending order of value, so the result does not depend on
/// member order and single-term compositions reproduce that term bit-for-bit.
std::vector<TrajArray> composed_epsilon(const CompositionSpec& spec, const std::vector<TrajArray>& x, int t);
TrajArray composed_epsilon(const CompositionSpec& spec, const TrajArray& x, int t);

/// Same reverse process as diffusion::sample with the composed prediction as
/// the noise source. Member start and goal are replaced by the arguments.
diffusion::SampleResult compose_sample(const CompositionSpec& spec, const Pose& start, const Pose& goal,
                                       std::size_t n, const diffusion::SamplerConfig& cfg, std::uint64_t seed);

/// File form: {"members": [{"checkpoint", "obstacle", "nu"}], "nu_uncond", "uncond_source"}.
/// "obstacle" is "none" or "dynamic:<k>" referring to the scene's k-th dynamic obstacle.
struct MemberConfig {
  std::string checkpoint;
  std::string obstacle = "none";
  double nu = 1.0;
};

struct CompositionConfig {
  std::vector<MemberConfig> members;
  double nu_uncond = 1.0;
  std::size_t uncond_source = 0;

  static CompositionConfig parse(std::string_view json_text);
  std::string to_json() const;
};

CompositionConfig load_composition_config(const std::string& path);

using ModelLoader = std::function<std::shared_ptr<const Denoiser>(const std::string& checkpoint)>;

/// Resolves a config against a scene: checkpoints via `loader` and obstacle
/// references via the scene's dynamic obstacles sampled at dt.
CompositionSpec build_composition(const CompositionConfig& cfg, const sim::SceneSpec& scene, double dt,
                                  const ModelLoader& loader);

}  // namespace diffplan::compose
