#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "yoeo/cli.hpp"
#include "yoeo/network.hpp"
#include "yoeo/scene_io.hpp"

using namespace yoeo;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

bool same_layer(const DenseLayer& a, const DenseLayer& b) { return a.weight == b.weight && a.bias == b.bias; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("generate writes scenes and manifest deterministically") {
  TempDir t("yoeo_cli_generate");
  Run r = cli({"generate", "--seed", "1", "--count", "3", "--points-per-scene", "1024", "--out", t / "a"});
  REQUIRE(r.code == 0);
  for (const char* f : {"scene_0000.json", "scene_0001.json", "scene_0002.json", "manifest.json", "config.json"}) {
    CHECK(fs::exists(t.path / "a" / f));
  }
  CHECK_FALSE(fs::exists(t.path / "a" / "scene_0003.json"));
  const Json manifest = read_json_file(t / "a/manifest.json");
  CHECK(manifest["scenes"].size() == 3);
  CHECK(read_json_file(t / "a/config.json")["seed"] == 1);

  r = cli({"generate", "--seed", "1", "--count", "3", "--points-per-scene", "1024", "--out", t / "b", "--jobs", "3"});
  REQUIRE(r.code == 0);
  for (const char* f : {"scene_0000.json", "scene_0002.json", "manifest.json"}) {
    CHECK(slurp(t.path / "a" / f) == slurp(t.path / "b" / f));
  }

  r = cli({"generate", "--seed", "1", "--count", "1", "--points-per-scene", "512", "--export-ply", "--out", t / "ply"});
  CHECK(r.code == 0);
  CHECK(slurp(t.path / "ply/scene_0000.ply").rfind("ply\n", 0) == 0);
}

TEST_CASE("argument and config errors") {
  TempDir t("yoeo_cli_errors");
  Run r = cli({"generate", "--seed", "1", "--count", "0", "--out", t / "x"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("YOEO-E1:", 0) == 0);
  CHECK(r.err.find("count must be ≥ 1") != std::string::npos);

  r = cli({"generate", "--count", "2", "--out", t / "x"});
  CHECK(r.code == 1);
  CHECK(r.err.find("seed") != std::string::npos);

  r = cli({"generate", "--seed", "-4", "--out", t / "x"});
  CHECK(r.code == 1);
  r = cli({"generate", "--seed", "1", "--count", "two", "--out", t / "x"});
  CHECK(r.code == 1);
  CHECK(r.err.find("count") != std::string::npos);
  r = cli({"frobnicate"});
  CHECK(r.code == 1);
  r = cli({});
  CHECK(r.code == 1);

  std::ofstream(t.path / "cfg.json") << R"({"seed": 5, "count": 2, "points_per_scene": 600})";
  r = cli({"generate", "--config", t / "cfg.json", "--count", "1", "--out", t / "c"});
  REQUIRE(r.code == 0);
  const Json echoed = read_json_file(t / "c/config.json");
  CHECK(echoed["count"] == 1);
  CHECK(echoed["seed"] == 5);
  CHECK(echoed["points_per_scene"] == 600);

  std::ofstream(t.path / "unknown.json") << R"({"seed": 5, "bogus_field": 1})";
  r = cli({"generate", "--config", t / "unknown.json", "--out", t / "d"});
  CHECK(r.code == 1);
  CHECK(r.err.find("bogus_field") != std::string::npos);

  std::ofstream(t.path / "typed.json") << R"({"seed": 5, "partial_view": "sometimes"})";
  r = cli({"generate", "--config", t / "typed.json", "--out", t / "d"});
  CHECK(r.code == 1);
  CHECK(r.err.find("partial_view") != std::string::npos);

  std::ofstream(t.path / "syntax.json") << "{\"seed\": 5,\n  \"count\": }";
  r = cli({"generate", "--config", t / "syntax.json", "--out", t / "d"});
  CHECK(r.code == 1);
  CHECK(r.err.find("line 2") != std::string::npos);

  r = cli({"train", "--seed", "1", "--data", t / "nowhere", "--out", t / "e"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("YOEO-E2:", 0) == 0);
}

TEST_CASE("train infer eval bench") {
  TempDir t("yoeo_cli_flow");
  REQUIRE(cli({"generate", "--seed", "4", "--count", "10", "--points-per-scene", "700", "--min-part-points", "32",
               "--out", t / "data"}).code == 0);

  Run r = cli({"train", "--seed", "2", "--data", t / "data", "--epochs", "3", "--hidden1", "8", "--hidden2", "8",
               "--train-points", "100", "--freeze", "center", "--freeze", "npcs", "--out", t / "train"});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(t.path / "train/loss_curve.csv");
  CHECK(csv.rfind("epoch,total,sem,center,npcs\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const ModelParams init = ModelParams::random(2, 8, 8);
  const ModelParams trained = load_weights(t / "train/weights.bin");
  CHECK_FALSE(same_layer(trained.semantic_head, init.semantic_head));
  CHECK(same_layer(trained.offset_head, init.offset_head));
  CHECK(same_layer(trained.npcs_head, init.npcs_head));

  r = cli({"infer", "--seed", "3", "--data", t / "data", "--weights", t / "train/weights.bin", "--out", t / "net"});
  REQUIRE(r.code == 0);
  const Json net = read_json_file(t / "net/predictions.json");
  CHECK(net["scenes"].size() == 10);
  CHECK(net["model_params"].get<std::size_t>() == trained.parameter_count());
  for (const auto& s : net["scenes"]) {
    CHECK(s["scene"].is_string());
    for (const auto& p : s["parts"]) {
      CHECK(p["class"].is_number_integer());
      CHECK(p["pose"]["R"].size() == 9);
      CHECK(p["size"].size() == 3);
      CHECK(p["inliers"].is_number_unsigned());
      CHECK((p["axis"].is_null() || p["axis"].contains("dir")));
    }
  }

  std::string bytes = slurp(t.path / "train/weights.bin");
  bytes[1] = 'Z';
  std::ofstream(t.path / "corrupt.bin", std::ios::binary) << bytes;
  r = cli({"infer", "--seed", "3", "--data", t / "data", "--weights", t / "corrupt.bin", "--out", t / "bad"});
  CHECK(r.code == 10);
  CHECK(r.err.find("magic") != std::string::npos);

  r = cli({"infer", "--seed", "3", "--data", t / "data", "--oracle", "--offset-sigma", "0", "--npcs-sigma", "0",
           "--out", t / "oracle"});
  REQUIRE(r.code == 0);
  const Json oracle = read_json_file(t / "oracle/predictions.json");
  for (std::size_t i = 0; i < 10; ++i) {
    const Scene scene = load_scene(t.path / "data" / oracle["scenes"][i]["scene"].get<std::string>());
    for (const auto& p : oracle["scenes"][i]["parts"]) {
      const Sim3Transform pose = sim3_from_json(p["pose"]);
      double best = 1e9;
      for (const auto& g : scene.instances) best = std::min(best, (g.pose.translation - pose.translation).norm());
      CHECK(best < pose.scale * 0.01);
    }
  }

  r = cli({"eval", "--seed", "0", "--data", t / "data", "--pred", t / "oracle/predictions.json", "--out", t / "ev1"});
  REQUIRE(r.code == 0);
  const Json report = read_json_file(t / "ev1/report.json");
  CHECK(report["overall"]["a10"].get<double>() == 100.0);
  CHECK(fs::exists(t.path / "ev1/report.txt"));
  REQUIRE(cli({"eval", "--seed", "0", "--data", t / "data", "--pred", t / "oracle/predictions.json", "--out",
               t / "ev2"}).code == 0);
  CHECK(slurp(t.path / "ev1/report.json") == slurp(t.path / "ev2/report.json"));

  Json empty = oracle;
  for (auto& s : empty["scenes"]) s["parts"] = Json::array();
  write_json_file(t.path / "empty.json", empty);
  REQUIRE(cli({"eval", "--seed", "0", "--data", t / "data", "--pred", t / "empty.json", "--out", t / "ev3"}).code == 0);
  const Json zero = read_json_file(t / "ev3/report.json");
  CHECK(zero["overall"]["a5"].get<double>() == 0.0);
  CHECK(zero["overall"]["a10"].get<double>() == 0.0);

  Json foreign = oracle;
  foreign["scenes"][0]["scene"] = "scene_9999.json";
  write_json_file(t.path / "foreign.json", foreign);
  r = cli({"eval", "--seed", "0", "--data", t / "data", "--pred", t / "foreign.json", "--out", t / "ev4"});
  CHECK(r.code == 12);

  r = cli({"bench", "--data", t / "data", "--oracle", "--runs", "3", "--out", t / "bench"});
  REQUIRE(r.code == 0);
  CHECK(read_json_file(t / "bench/bench.json")["throughput_hz"].get<double>() > 0.0);
}

TEST_CASE("binary reports errors through the exit code") {
  TempDir t("yoeo_cli_binary");
  const std::string cmd = std::string(YOEO_CLI_PATH) + " generate --seed 1 --count 0 --out " + (t / "x") + " 2>" + (t / "err.txt");
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 1);
  CHECK(slurp(t.path / "err.txt").rfind("YOEO-E1: InvalidArgument:", 0) == 0);
  const std::string help = std::string(YOEO_CLI_PATH) + " --help >" + (t / "help.txt");
  CHECK(WEXITSTATUS(std::system(help.c_str())) == 0);
  CHECK(slurp(t.path / "help.txt").find("generate") != std::string::npos);
}

}
