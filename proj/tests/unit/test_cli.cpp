#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cmib/cli/cli.hpp"
#include "cmib/model/checkpoint.hpp"

namespace fs = std::filesystem;
using cmib::cli::dispatch;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("CMIB_TEST_TMP");
  const fs::path root = env ? fs::path(env) : fs::temp_directory_path() / "cmib_cli_tests";
  const auto p = root / name;
  fs::remove_all(p);
  fs::create_directories(root);
  return p;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "cmib");
  return dispatch(args);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// Relative path -> contents for every regular file below root.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

const fs::path& toy_dataset() {
  static const fs::path dir = [] {
    auto d = scratch("toy_ds");
    REQUIRE(run({"synth", "--out", d.string(), "--windows", "12", "--seed", "3"}) == 0);
    return d;
  }();
  return dir;
}

std::vector<std::string> small_model() {
  return {"--heads", "4", "--layers", "1", "--d-ff", "32", "--batch", "4"};
}

const fs::path& toy_run() {
  static const fs::path dir = [] {
    auto d = scratch("toy_run");
    std::vector<std::string> args{"train", "--data", toy_dataset().string(), "--out", d.string(),
                                  "--steps", "10", "--log-every", "0"};
    for (auto& a : small_model()) args.push_back(a);
    REQUIRE(run(args) == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("synth is reproducible") {
  const auto a = scratch("synth_a"), b = scratch("synth_b");
  REQUIRE(run({"synth", "--out", a.string(), "--seed", "7", "--windows", "10"}) == 0);
  REQUIRE(run({"synth", "--out", b.string(), "--seed", "7", "--windows", "10"}) == 0);
  const auto sa = snapshot(a);
  CHECK(sa.size() > 10);
  CHECK(sa == snapshot(b));
  const auto c = scratch("synth_c");
  REQUIRE(run({"synth", "--out", c.string(), "--seed", "8", "--windows", "10"}) == 0);
  CHECK(sa != snapshot(c));
}

TEST_CASE("usage and runtime errors map to exit codes") {
  CHECK(run({}) == 2);
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({"synth"}) == 2);                                    // missing --out
  CHECK(run({"train", "--data", "x", "--out", "y", "--steps", "many"}) == 2);
  CHECK(run({"synth", "--out", scratch("cfg_missing").string(), "--config",
             "/nonexistent/cmib.toml"}) == 2);
  CHECK(run({"eval", "--ckpt", "/nonexistent/model.cmib", "--data", toy_dataset().string()}) == 1);
  CHECK(run({"train", "--data", "/nonexistent/ds", "--out", scratch("bad_train").string()}) == 1);
  CHECK(run({"synth", "--help"}) == 0);
}

TEST_CASE("train writes a run directory") {
  const auto& d = toy_run();
  CHECK(fs::exists(d / "model.cmib"));
  CHECK(fs::exists(d / "config.json"));
  CHECK(line_count(d / "loss.csv") == 11);
  const auto ck = cmib::model::load_checkpoint(d / "model.cmib");
  CHECK(ck.meta.step == 10);
  CHECK(ck.config.layers == 1);
  CHECK(ck.labels.size() == 3);
  const auto echoed = slurp(d / "cmib_config.toml");
  CHECK(echoed.find("steps=10") != std::string::npos);
  CHECK(echoed.find("d-ff=32") != std::string::npos);
}

TEST_CASE("config files: flags override the file, the file overrides defaults") {
  const auto dir = scratch("cfg");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "train.toml") << "steps=3\nbatch=4\nheads=4\nlayers=1\nd-ff=32\n";
    std::ofstream(dir / "train.json") << R"({"train": {"steps": 2, "batch": 2, "heads": 4,
                                              "layers": 1, "d_ff": 16}})";
  }
  const auto data = toy_dataset().string();
  auto r1 = dir / "r1", r2 = dir / "r2", r3 = dir / "r3";
  REQUIRE(run({"train", "--data", data, "--out", r1.string(), "--config",
               (dir / "train.toml").string(), "--log-every", "0"}) == 0);
  CHECK(line_count(r1 / "loss.csv") == 4);
  REQUIRE(run({"train", "--data", data, "--out", r2.string(), "--config",
               (dir / "train.toml").string(), "--steps", "5", "--log-every", "0"}) == 0);
  CHECK(line_count(r2 / "loss.csv") == 6);
  REQUIRE(run({"train", "--data", data, "--out", r3.string(),
               "--config=" + (dir / "train.json").string(), "--log-every", "0"}) == 0);
  CHECK(line_count(r3 / "loss.csv") == 3);
  CHECK(cmib::model::load_checkpoint(r3 / "model.cmib").config.d_ff == 16);

  // the echoed config reproduces the run
  auto r4 = dir / "r4";
  REQUIRE(run({"train", "--data", data, "--out", r4.string(), "--config",
               (r1 / "cmib_config.toml").string()}) == 0);
  CHECK(slurp(r4 / "model.cmib") == slurp(r1 / "model.cmib"));

  std::ofstream(dir / "bad.json") << R"({"eval": {"steps": 2}})";
  CHECK(run({"train", "--data", data, "--out", (dir / "r5").string(), "--config",
             (dir / "bad.json").string()}) == 2);
}

TEST_CASE("eval and infill from a checkpoint") {
  const auto ckpt = (toy_run() / "model.cmib").string();
  const auto data = toy_dataset().string();
  const auto out = scratch("eval_out");
  REQUIRE(run({"eval", "--ckpt", ckpt, "--data", data, "--out", out.string(), "--split", "all",
               "--anchor-frames", "8", "16", "--semantic", "--per-window", "--threads", "1"}) == 0);
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(report.contains("mib"));
  CHECK(report["anchor"].size() == 2);
  CHECK(report.contains("semantic"));
  CHECK(fs::exists(out / "report.txt"));
  CHECK(fs::exists(out / "per_window.csv"));

  const auto js = scratch("infill") / "seq.json";
  fs::create_directories(js.parent_path());
  REQUIRE(run({"infill", "--ckpt", ckpt, "--data", data, "--window", "2", "--anchor-frame", "12",
               "--out", js.string(), "--format", "json"}) == 0);
  CHECK(nlohmann::json::parse(slurp(js))["frames"].size() == 32);
  const auto bvh = js.parent_path() / "seq.bvh";
  REQUIRE(run({"infill", "--ckpt", ckpt, "--data", data, "--out", bvh.string(), "--format",
               "bvh"}) == 0);
  CHECK(slurp(bvh).rfind("HIERARCHY", 0) == 0);
  CHECK(run({"infill", "--ckpt", ckpt, "--data", data, "--anchor-frame", "32", "--out",
             js.string()}) == 1);
}
