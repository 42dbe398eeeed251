#include <array>
#include <cmath>
#include <memory>
#include <random>
#include <tuple>

#include "doctest.h"
#include "helpers.hpp"
#include "diffplan/compose.hpp"

using namespace diffplan;
using namespace diffplan::diffusion;
using compose::CompositionSpec;
using compose::Member;

namespace {

constexpr int kL = 8;

std::shared_ptr<GaussianOracleDenoiser> gauss(double mu, double sigma, double mu_u, double sigma_u, int horizon = kL) {
  return std::make_shared<GaussianOracleDenoiser>(
      TrajArray::Constant(4, horizon, mu), TrajArray::Constant(4, horizon, sigma * sigma),
      TrajArray::Constant(4, horizon, mu_u), TrajArray::Constant(4, horizon, sigma_u * sigma_u), make_schedule());
}

TrajArray random_x(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.5);
  TrajArray x(4, kL);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  return x;
}

Member member(std::shared_ptr<const Denoiser> d, double nu) {
  Member m;
  m.model = std::move(d);
  m.nu = nu;
  return m;
}

// Closed form: every term is the score of a Gaussian over tau^t, so the
// weighted sum is sqrt(1 - ab) * P * (x - m) with P = sum c_k / s_k^2 and
// m = sum c_k sqrt(ab) mu_k / s_k^2 / P.
double closed_form(double x, double ab, const std::vector<std::array<double, 3>>& terms) {
  double p = 0.0, pm = 0.0;
  for (const auto& [c, mu, var] : terms) {
    const double s2 = ab * var + 1.0 - ab;
    p += c / s2;
    pm += c * std::sqrt(ab) * mu / s2;
  }
  return std::sqrt(1.0 - ab) * (p * x - pm);
}

}  // namespace

TEST_SUITE("compose") {
  TEST_CASE("single member with unit weight is the member itself") {
    const auto a = gauss(0.7, 0.5, 0.0, 1.0);
    CompositionSpec spec;
    spec.members = {member(a, 1.0)};
    std::mt19937_64 rng(1);
    const TrajArray x = random_x(rng);
    CHECK(compose::composed_epsilon(spec, x, 40) == a->predict({x}, 40, {})[0]);
    CHECK(spec.uncond_coefficient() == 0.0);
  }

  TEST_CASE("zero weights give the unconditional prediction") {
    const auto a = gauss(0.7, 0.5, -0.2, 1.3);
    const auto b = gauss(-0.4, 0.5, 0.3, 0.9);
    CompositionSpec spec;
    spec.members = {member(a, 0.0), member(b, 0.0)};
    spec.uncond_source = 1;
    std::mt19937_64 rng(2);
    const TrajArray x = random_x(rng);
    Conditioning unc;
    unc.cond_mask = false;
    CHECK(compose::composed_epsilon(spec, x, 17) == b->predict({x}, 17, unc)[0]);
  }

  TEST_CASE("Gaussian closure at 1e-9") {
    const auto a = gauss(1.0, 0.5, 0.2, 1.5);
    const auto b = gauss(-1.0, 0.5, 0.2, 1.5);
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> tpick(1, 100);
    for (auto [nu_a, nu_b, nu_u] : {std::tuple{1.0, 1.0, 1.0}, std::tuple{0.8, 0.3, 5.0}, std::tuple{8.0, 8.0, 1.0}}) {
      CompositionSpec spec;
      spec.members = {member(a, nu_a), member(b, nu_b)};
      spec.nu_uncond = nu_u;
      for (int k = 0; k < 200; ++k) {
        const int t = tpick(rng);
        const double ab = a->schedule().alpha_bar[t];
        const TrajArray x = random_x(rng);
        const TrajArray e = compose::composed_epsilon(spec, x, t);
        const std::vector<std::array<double, 3>> terms{
            {nu_a, 1.0, 0.25}, {nu_b, -1.0, 0.25}, {nu_u - nu_a - nu_b, 0.2, 2.25}};
        for (int i = 0; i < x.size(); ++i) CHECK(std::abs(e.data()[i] - closed_form(x.data()[i], ab, terms)) < 1e-9);
      }
    }
  }

  TEST_CASE("composed DDPM samples follow the product Gaussian") {
    const double sigma = 0.5;
    const auto a = gauss(1.0, sigma, -0.3, sigma);
    const auto b = gauss(-1.0, sigma, -0.3, sigma);
    CompositionSpec spec;
    spec.members = {member(a, 1.0), member(b, 1.0)};
    SamplerConfig cfg;
    cfg.kind = SamplerKind::kDdpm;
    cfg.clip_denoised = false;
    const std::size_t n = 2000;
    const SampleResult r = compose::compose_sample(spec, Pose{}, Pose{}, n, cfg, 11);
    const double expected = 1.0 + -1.0 - -0.3;
    const double se = sigma / std::sqrt(static_cast<double>(n));
    for (int j = 1; j < kL - 1; ++j) {
      double sx = 0.0;
      for (const Trajectory& t : r.trajectories) sx += t.poses[j].x;
      CHECK(std::abs(sx / n - expected) < 3 * se);
    }
  }

  TEST_CASE("single member composition reproduces direct sampling") {
    const auto a = gauss(0.4, 0.3, 0.0, 1.0, 16);
    CompositionSpec spec;
    spec.members = {member(a, 1.0)};
    const Pose s = Pose::from_yaw(-0.5, 0.1, 0.2);
    const Pose g = Pose::from_yaw(0.6, 0.4, 0.0);
    Conditioning c;
    c.start = s;
    c.goal = g;
    const SampleResult direct = sample(*a, c, 4, {}, 5);
    const SampleResult comp = compose::compose_sample(spec, s, g, 4, {}, 5);
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(direct.trajectories[i].to_array() == comp.trajectories[i].to_array());

    spec.members[0].nu = 0.0;
    const SampleResult unc = sample(*a, c.unconditional(), 4, {}, 5);
    const SampleResult comp0 = compose::compose_sample(spec, s, g, 4, {}, 5);
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(unc.trajectories[i].to_array() == comp0.trajectories[i].to_array());
  }

  TEST_CASE("weights act linearly") {
    const auto a = gauss(0.7, 0.4, 0.0, 1.0);
    const auto b = gauss(-0.3, 0.6, 0.0, 1.0);
    std::mt19937_64 rng(5);
    const TrajArray x = random_x(rng);
    auto eps_for = [&](double nu_a) {
      CompositionSpec spec;
      spec.members = {member(a, nu_a), member(b, 0.5)};
      spec.nu_uncond = 1.0 + nu_a;
      return compose::composed_epsilon(spec, x, 25);
    };
    const TrajArray base = eps_for(0.0);
    const TrajArray one = eps_for(1.0);
    const TrajArray two = eps_for(2.0);
    CHECK(((two - base) - 2.0 * (one - base)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("member order does not change the result") {
    const auto a = gauss(0.7, 0.4, 0.1, 1.0);
    const auto b = gauss(-0.3, 0.6, 0.1, 1.0);
    const auto c = gauss(0.2, 0.2, 0.1, 1.0);
    std::mt19937_64 rng(6);
    const TrajArray x = random_x(rng);
    CompositionSpec p;
    p.members = {member(a, 0.8), member(b, 0.3), member(c, 1.7)};
    p.nu_uncond = 5.0;
    CompositionSpec q;
    q.members = {member(c, 1.7), member(a, 0.8), member(b, 0.3)};
    q.nu_uncond = 5.0;
    q.uncond_source = 1;
    CHECK(compose::composed_epsilon(p, x, 60) == compose::composed_epsilon(q, x, 60));
  }

  TEST_CASE("members must agree on shape and schedule") {
    CompositionSpec spec;
    spec.members = {member(gauss(0, 1, 0, 1, 8), 1.0), member(gauss(0, 1, 0, 1, 16), 1.0)};
    try {
      spec.validate();
      FAIL("expected kShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kShapeMismatch);
    }
    auto other = std::make_shared<GaussianOracleDenoiser>(TrajArray::Zero(4, 8), TrajArray::Ones(4, 8),
                                                          TrajArray::Zero(4, 8), TrajArray::Ones(4, 8),
                                                          make_schedule(50));
    spec.members = {member(gauss(0, 1, 0, 1), 1.0), member(other, 1.0)};
    CHECK_THROWS_AS(spec.validate(), Error);
    spec.members = {member(gauss(0, 1, 0, 1), 1.0)};
    spec.uncond_source = 2;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec.members.clear();
    CHECK_THROWS_AS(spec.validate(), Error);
  }

  TEST_CASE("config resolves obstacles from the scene") {
    const sim::SceneSpec scene = sim::load_scene(testutil::source_path("scenes/toy_composed.scene"));
    compose::CompositionConfig cfg;
    cfg.members = {{"static", "none", 0.8}, {"dynamic", "dynamic:0", 0.3}};
    cfg.nu_uncond = 5.0;
    int loads = 0;
    const auto loader = [&](const std::string&) {
      ++loads;
      return std::static_pointer_cast<const Denoiser>(gauss(0, 1, 0, 1, 128));
    };
    const CompositionSpec spec = compose::build_composition(cfg, scene, 0.1, loader);
    CHECK(loads == 2);
    CHECK_FALSE(spec.members[0].cond.obstacle.has_value());
    REQUIRE(spec.members[1].cond.obstacle.has_value());
    CHECK((*spec.members[1].cond.obstacle)(0, 0) == doctest::Approx(3.5));
    CHECK((*spec.members[1].cond.obstacle)(0, 10) == doctest::Approx(3.1));
    CHECK(spec.uncond_coefficient() == doctest::Approx(3.9));
    cfg.members[1].obstacle = "dynamic:4";
    CHECK_THROWS_AS(compose::build_composition(cfg, scene, 0.1, loader), Error);
    cfg.members[1].obstacle = "static:0";
    CHECK_THROWS_AS(compose::build_composition(cfg, scene, 0.1, loader), Error);
  }
}
