#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "diffplan/binary_io.hpp"
#include "diffplan/checkpoint.hpp"
#include "diffplan/compose.hpp"
#include "diffplan/scene.hpp"

using namespace diffplan;

namespace {

datagen::Dataset small_dataset(bool with_obstacle) {
  datagen::Dataset ds;
  ds.horizon = 8;
  ds.dt = 0.1;
  ds.map_id = "unit";
  ds.scene_hash = 0x1234abcdULL;
  for (int d = 0; d < 3; ++d) {
    datagen::Demonstration demo;
    demo.traj = testutil::straight(0.5 + d, 1.0, 0.1 * d, 0.03, 8, 5);
    demo.real_length = 6;
    if (with_obstacle) {
      ObstacleTrack o(2, 8);
      for (int j = 0; j < 8; ++j) o.col(j) << 3.0 - 0.04 * j, 1.2;
      demo.obstacle = o;
    }
    ds.demos.push_back(demo);
  }
  return ds;
}

diffusion::Checkpoint small_checkpoint() {
  diffusion::NetConfig net;
  net.horizon = 16;
  net.base_channels = 8;
  net.mid_channels = 8;
  net.time_dim = 8;
  net.embed_dim = 8;
  net.groups = 4;
  diffusion::LearnedDenoiser model(net, diffusion::make_schedule(), diffusion::NormStats::from_bounds(6, 6));
  model.net().init(5);
  return {model, 77, 3};
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("byte reader reports the failing offset") {
    io::ByteWriter w;
    w.u32(7);
    w.u8(1);
    const std::string bytes = w.take();
    io::ByteReader r(bytes);
    CHECK(r.u32() == 7);
    CHECK(r.u8() == 1);
    try {
      r.f64();
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 5);
      CHECK(e.code() == ErrorCode::kFileFormat);
    }
  }

  TEST_CASE("dataset encode decode encode is byte identical") {
    for (bool obstacle : {false, true}) {
      const std::string a = io::encode_dataset(small_dataset(obstacle));
      const datagen::Dataset back = io::decode_dataset(a);
      CHECK(back.demos.size() == 3);
      CHECK(back.map_id == "unit");
      CHECK(back.demos[1].obstacle.has_value() == obstacle);
      CHECK(io::encode_dataset(back) == a);
    }
  }

  TEST_CASE("dataset decode rejects truncation and bad magic") {
    const std::string a = io::encode_dataset(small_dataset(true));
    CHECK_THROWS_AS(io::decode_dataset(a.substr(0, a.size() - 3)), FormatError);
    std::string bad = a;
    bad[0] = 'X';
    try {
      io::decode_dataset(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
    CHECK_THROWS_AS(io::decode_dataset(a + "z"), FormatError);
  }

  TEST_CASE("checkpoint round trip is byte identical") {
    const diffusion::Checkpoint ck = small_checkpoint();
    const std::string a = diffusion::encode_checkpoint(ck);
    const diffusion::Checkpoint back = diffusion::decode_checkpoint(a);
    CHECK(back.config_hash == 77);
    CHECK(back.seed == 3);
    CHECK(back.model.net().params() == ck.model.net().params());
    CHECK(back.model.norm() == ck.model.norm());
    CHECK(diffusion::encode_checkpoint(back) == a);
  }

  TEST_CASE("checkpoint decode rejects damage") {
    const std::string a = diffusion::encode_checkpoint(small_checkpoint());
    CHECK_THROWS_AS(diffusion::decode_checkpoint(a.substr(0, a.size() - 1)), FormatError);
    CHECK_THROWS_AS(diffusion::decode_checkpoint(a + std::string(1, '\0')), FormatError);
    std::string v = a;
    v[4] = 9;
    try {
      diffusion::decode_checkpoint(v);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 4);
    }
  }

  TEST_CASE("missing files report file_not_found") {
    try {
      diffusion::load_checkpoint("/nonexistent/model.ckpt");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kFileNotFound);
    }
    CHECK_THROWS_AS(io::load_dataset("/nonexistent/data.bin"), Error);
  }

  TEST_CASE("atomic write leaves the final file only") {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "diffplan_io_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "data.bin").string();
    io::save_dataset(small_dataset(false), path);
    CHECK(io::load_dataset(path).demos.size() == 3);
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++files;
    CHECK(files == 1);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("scene text round trip") {
    for (const char* name : {"scenes/toy_static.scene", "scenes/cs1_dynamic.scene", "scenes/toy_composed.scene"}) {
      const sim::SceneSpec s = sim::load_scene(testutil::source_path(name));
      const std::string text = sim::format_scene(s);
      CHECK(sim::format_scene(sim::parse_scene(text)) == text);
      CHECK(sim::scene_hash(sim::parse_scene(text)) == sim::scene_hash(s));
    }
  }

  TEST_CASE("scene parse errors carry the byte offset of the line") {
    try {
      sim::parse_scene("scene v1\nbounds 6 6\nrect 1 2 3\n");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 20);
    }
    CHECK_THROWS_AS(sim::parse_scene("not a scene\n"), FormatError);
  }

  TEST_CASE("composition config round trip") {
    const auto cfg = compose::CompositionConfig::parse(
        R"({"members":[{"checkpoint":"a.ckpt","obstacle":"none","nu":0.8},)"
        R"({"checkpoint":"b.ckpt","obstacle":"dynamic:0","nu":0.3}],"nu_uncond":5,"uncond_source":1})");
    REQUIRE(cfg.members.size() == 2);
    CHECK(cfg.members[1].obstacle == "dynamic:0");
    CHECK(cfg.nu_uncond == 5.0);
    CHECK(cfg.uncond_source == 1);
    CHECK(compose::CompositionConfig::parse(cfg.to_json()).to_json() == cfg.to_json());
    CHECK_THROWS_AS(compose::CompositionConfig::parse("{\"members\": 3}"), Error);
    CHECK_THROWS_AS(compose::CompositionConfig::parse("{"), Error);
  }
}
