#include "diffplan/compose.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "diffplan/binary_io.hpp"
#include "diffplan/error.hpp"
#include "json.hpp"

namespace diffplan::compose {

void CompositionSpec::validate() const {
  if (members.empty()) throw Error(ErrorCode::kConfigValidation, "composition needs at least one member");
  if (uncond_source >= members.size())
    throw Error(ErrorCode::kConfigValidation, "uncond_source does not name a member");
  if (!std::isfinite(nu_uncond)) throw Error(ErrorCode::kConfigValidation, "nu_uncond must be finite");
  const Denoiser* ref = members.front().model.get();
  if (ref == nullptr) throw Error(ErrorCode::kConfigValidation, "composition member without a model");
  for (const Member& m : members) {
    if (m.model == nullptr) throw Error(ErrorCode::kConfigValidation, "composition member without a model");
    if (!std::isfinite(m.nu)) throw Error(ErrorCode::kConfigValidation, "member weight must be finite");
    if (m.model->horizon() != ref->horizon())
      throw Error(ErrorCode::kShapeMismatch, "composition members disagree on the horizon");
    const auto& a = m.model->schedule();
    const auto& b = ref->schedule();
    if (a.steps != b.steps || a.alpha_bar != b.alpha_bar)
      throw Error(ErrorCode::kShapeMismatch, "composition members disagree on the noise schedule");
    if (!(m.model->norm() == ref->norm()))
      throw Error(ErrorCode::kShapeMismatch, "composition members disagree on the normalization");
  }
}

double CompositionSpec::uncond_coefficient() const {
  double c = nu_uncond;
  for (const Member& m : members) c -= m.nu;
  return c;
}

std::vector<TrajArray> composed_epsilon(const CompositionSpec& spec, const std::vector<TrajArray>& x, int t) {
  spec.validate();
  if (x.empty()) return {};
  struct Term {
    double coef;
    std::vector<TrajArray> eps;
  };
  std::vector<Term> terms;
  const double cu = spec.uncond_coefficient();
  if (cu != 0.0) {
    const Member& src = spec.members[spec.uncond_source];
    terms.push_back({cu, src.model->predict(x, t, src.cond.unconditional())});
  }
  for (const Member& m : spec.members) {
    if (m.nu == 0.0) continue;
    terms.push_back({m.nu, m.model->predict(x, t, m.cond)});
  }
  std::vector<TrajArray> out;
  out.reserve(x.size());
  for (std::size_t b = 0; b < x.size(); ++b) {
    for (const Term& term : terms) {
      if (term.eps.size() != x.size() || term.eps[b].rows() != x[b].rows() || term.eps[b].cols() != x[b].cols())
        throw Error(ErrorCode::kShapeMismatch, "member prediction shape differs from the input");
    }
    TrajArray acc = TrajArray::Zero(x[b].rows(), x[b].cols());
    if (terms.size() == 1) {
      const Term& only = terms.front();
      acc = only.coef == 1.0 ? only.eps[b] : TrajArray(only.coef * only.eps[b]);
    } else if (!terms.empty()) {
      std::vector<double> vals(terms.size());
      for (Eigen::Index j = 0; j < acc.cols(); ++j) {
        for (Eigen::Index i = 0; i < acc.rows(); ++i) {
          for (std::size_t k = 0; k < terms.size(); ++k) vals[k] = terms[k].coef * terms[k].eps[b](i, j);
          std::sort(vals.begin(), vals.end());
          double s = 0.0;
          for (double v : vals) s += v;
          acc(i, j) = s;
        }
      }
    }
    out.push_back(std::move(acc));
  }
  return out;
}

TrajArray composed_epsilon(const CompositionSpec& spec, const TrajArray& x, int t) {
  return composed_epsilon(spec, std::vector<TrajArray>{x}, t).front();
}

diffusion::SampleResult compose_sample(const CompositionSpec& spec, const Pose& start, const Pose& goal,
                                       std::size_t n, const diffusion::SamplerConfig& cfg, std::uint64_t seed) {
  spec.validate();
  CompositionSpec local = spec;
  for (Member& m : local.members) {
    m.cond.start = start;
    m.cond.goal = goal;
  }
  const Denoiser& ref = *local.members.front().model;
  const diffusion::EpsFn fn = [&](const std::vector<TrajArray>& x, int t) { return composed_epsilon(local, x, t); };
  return diffusion::sample_with(fn, ref.schedule(), ref.norm(), ref.horizon(), start, goal, n, cfg, seed);
}

CompositionConfig CompositionConfig::parse(std::string_view json_text) {
  using nlohmann::json;
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kConfigValidation, "composition config: " + what); };
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("composition config is not valid JSON: ") + e.what(), e.byte);
  }
  if (!j.is_object()) fail("top level must be an object");
  CompositionConfig cfg;
  try {
    if (j.contains("nu_uncond")) cfg.nu_uncond = j.at("nu_uncond").get<double>();
    if (j.contains("uncond_source")) cfg.uncond_source = j.at("uncond_source").get<std::size_t>();
    if (!j.contains("members") || !j.at("members").is_array()) fail("'members' must be an array");
    for (const json& m : j.at("members")) {
      MemberConfig mc;
      mc.checkpoint = m.at("checkpoint").get<std::string>();
      if (m.contains("obstacle")) mc.obstacle = m.at("obstacle").get<std::string>();
      if (m.contains("nu")) mc.nu = m.at("nu").get<double>();
      cfg.members.push_back(std::move(mc));
    }
  } catch (const json::exception& e) {
    fail(e.what());
  }
  if (cfg.members.empty()) fail("at least one member is required");
  if (cfg.uncond_source >= cfg.members.size()) fail("uncond_source out of range");
  return cfg;
}

std::string CompositionConfig::to_json() const {
  nlohmann::ordered_json j;
  j["members"] = nlohmann::ordered_json::array();
  for (const MemberConfig& m : members)
    j["members"].push_back({{"checkpoint", m.checkpoint}, {"obstacle", m.obstacle}, {"nu", m.nu}});
  j["nu_uncond"] = nu_uncond;
  j["uncond_source"] = uncond_source;
  return j.dump(2) + "\n";
}

CompositionConfig load_composition_config(const std::string& path) {
  return CompositionConfig::parse(io::read_file(path));
}

CompositionSpec build_composition(const CompositionConfig& cfg, const sim::SceneSpec& scene, double dt,
                                  const ModelLoader& loader) {
  CompositionSpec spec;
  spec.nu_uncond = cfg.nu_uncond;
  spec.uncond_source = cfg.uncond_source;
  for (const MemberConfig& mc : cfg.members) {
    Member m;
    m.model = loader(mc.checkpoint);
    m.nu = mc.nu;
    if (mc.obstacle != "none") {
      constexpr std::string_view kPrefix = "dynamic:";
      if (mc.obstacle.rfind(kPrefix, 0) != 0)
        throw Error(ErrorCode::kConfigValidation, "obstacle must be 'none' or 'dynamic:<k>'");
      std::size_t k = 0;
      try {
        k = std::stoul(mc.obstacle.substr(kPrefix.size()));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kConfigValidation, "bad obstacle index in '" + mc.obstacle + "'");
      }
      if (k >= scene.dynamic.size())
        throw Error(ErrorCode::kConfigValidation, "scene has no dynamic obstacle " + std::to_string(k));
      m.cond.obstacle = scene.dynamic[k].sample(dt, m.model->horizon());
    }
    spec.members.push_back(std::move(m));
  }
  spec.validate();
  return spec;
}

}  // namespace diffplan::compose
