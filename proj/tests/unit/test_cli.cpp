#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "cli.hpp"
#include "diffplan/binary_io.hpp"

namespace fs = std::filesystem;
using diffplan::cli::dispatch;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("diffplan_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string small_scene(const fs::path& dir) {
  const std::string path = (dir / "small.scene").string();
  diffplan::io::write_file(path,
                           "scene v1\n"
                           "name small\n"
                           "bounds 3 3\n"
                           "resolution 0.05\n"
                           "goal 2.2 1.5 0 1\n"
                           "start_region 0.7 1.4 0.8 1.6\n");
  return path;
}

std::string manifest_without_argv(const std::string& path) {
  nlohmann::json m = nlohmann::json::parse(diffplan::io::read_file(path));
  m.erase("argv");
  m["inputs"].erase("dataset");
  m["outputs"].erase("curve");
  for (auto& [k, v] : m["outputs"].items())
    if (v.is_object()) v.erase("path");
  return m.dump();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 1 and a JSON record") {
    const Run r = run({"bogus"});
    CHECK(r.code == 1);
    const nlohmann::json e = nlohmann::json::parse(r.err);
    CHECK(e["error"] == "usage");
    CHECK(run({}).code == 1);
    CHECK(run({"plan", "--start", "1,1,0"}).code == 1);
  }

  TEST_CASE("plan with a missing checkpoint is a data error with no outputs") {
    const fs::path dir = scratch("missing");
    const std::string out = (dir / "plan.json").string();
    const Run r = run({"plan", "--scene", small_scene(dir), "--start", "0.8,1.5,0", "--ckpt",
                       (dir / "absent.ckpt").string(), "--out", out});
    CHECK(r.code == 2);
    CHECK(nlohmann::json::parse(r.err)["error"] == "file_not_found");
    CHECK_FALSE(fs::exists(out));
    CHECK_FALSE(fs::exists(out + ".manifest.json"));
    fs::remove_all(dir);
  }

  TEST_CASE("malformed scenes report the byte offset") {
    const fs::path dir = scratch("badscene");
    const std::string scene = (dir / "bad.scene").string();
    diffplan::io::write_file(scene, "scene v1\nbounds 6 6\nrect 1 2 3\n");
    const Run r = run({"gen-data", "--scene", scene, "--out", (dir / "d.data").string()});
    CHECK(r.code == 2);
    const nlohmann::json e = nlohmann::json::parse(r.err);
    CHECK(e["error"] == "file_format");
    CHECK(e["offset"] == 20);
    fs::remove_all(dir);
  }

  TEST_CASE("identical runs write identical datasets and manifests") {
    const fs::path dir = scratch("repro");
    const std::string scene = small_scene(dir);
    std::vector<std::string> manifests, data, ckpts;
    for (int i = 0; i < 2; ++i) {
      const std::string d = (dir / ("d" + std::to_string(i) + ".data")).string();
      const std::string c = (dir / ("m" + std::to_string(i) + ".ckpt")).string();
      REQUIRE(run({"gen-data", "--scene", scene, "--out", d, "--starts", "1", "--seed", "3", "--horizon", "32"}).code ==
              0);
      REQUIRE(run({"train", "--data", d, "--out", c, "--iterations", "3", "--batch", "2", "--channels", "8",
                   "--mid-channels", "8", "--seed", "4"})
                  .code == 0);
      data.push_back(diffplan::io::read_file(d));
      ckpts.push_back(diffplan::io::read_file(c));
      manifests.push_back(manifest_without_argv(d + ".manifest.json") + manifest_without_argv(c + ".manifest.json"));
    }
    CHECK(data[0] == data[1]);
    CHECK(ckpts[0] == ckpts[1]);
    CHECK(manifests[0] == manifests[1]);

    const std::string plan = (dir / "plan.json").string();
    const Run p = run({"plan", "--scene", scene, "--start", "0.8,1.5,0", "--ckpt", (dir / "m0.ckpt").string(),
                       "--out", plan, "--seed", "1"});
    CHECK((p.code == 0 || p.code == 3));
    if (p.code == 0) {
      const nlohmann::json j = nlohmann::json::parse(diffplan::io::read_file(plan));
      CHECK(j["poses"].size() == 32);
      CHECK(fs::exists(plan + ".manifest.json"));
    }
    fs::remove_all(dir);
  }
}
