#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(SIAMTRACK_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

// Small data and a tiny model keep each CLI call well under a second.
const char* kSmallConfig = R"({
  "data": {"train": {"num_frames": 6, "width": 64, "height": 64, "splits": [{"kind": "easy", "count": 2}]},
           "eval": {"num_frames": 6, "width": 128, "height": 128, "splits": [{"kind": "easy", "count": 1}]}},
  "backbone": {"stage_channels": [2, 3, 3, 3], "feature_channels": 3, "projection_channels": 3,
               "target_size": 16, "search_size": 32},
  "sweep": {"extent": 0.5, "step": 0.5, "max_dt": 2},
  "train": {"total_steps": 4, "batch_size": 2, "eval_every": 2, "checkpoint_every": 2}
})";

std::set<fs::path> relative_files(const fs::path& root) {
  std::set<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.insert(fs::relative(e.path(), root));
  }
  return out;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  const auto fa = relative_files(a);
  if (fa != relative_files(b)) return false;
  for (const auto& f : fa) {
    if (test::read_bytes(a / f) != test::read_bytes(b / f)) return false;
  }
  return true;
}

nlohmann::json schema_of(const nlohmann::json& j) {
  if (j.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = schema_of(it.value());
    return out;
  }
  if (j.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : j) out.push_back(schema_of(v));
    return out;
  }
  return j.type_name();
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage and config errors exit with 2") {
    const auto dir = test::temp_dir("cli_usage");
    CHECK(run("") == 2);
    CHECK(run("gen-data --out " + (dir / "d").string()) == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("eval --checkpoint x --data y --out z --target-mode psychic") == 2);
    const fs::path bad = write_config(dir, R"({"train":{"unknown_key":1}})");
    CHECK(run("gen-data --config " + bad.string() + " --out " + (dir / "d").string()) == 2);
    CHECK_FALSE(fs::exists(dir / "d"));
    CHECK(run("--help") == 0);
  }

  TEST_CASE("runtime failures exit with 1") {
    const auto dir = test::temp_dir("cli_runtime");
    const fs::path cfg = write_config(dir, kSmallConfig);
    CHECK(run("train --config " + cfg.string() + " --data " + (dir / "missing").string() + " --out " +
              (dir / "runs").string()) == 1);
    CHECK(run("eval --checkpoint " + (dir / "missing.ckpt").string() + " --data " + dir.string() + " --out " +
              (dir / "e").string()) == 1);
  }

  TEST_CASE("gen-data is reproducible and the seed changes frames, not schema") {
    const auto dir = test::temp_dir("cli_gen");
    const fs::path cfg = write_config(dir, kSmallConfig);
    REQUIRE(run("gen-data --config " + cfg.string() + " --seed 3 --out " + (dir / "a").string()) == 0);
    REQUIRE(run("gen-data --config " + cfg.string() + " --seed 3 --out " + (dir / "b").string()) == 0);
    REQUIRE(run("gen-data --config " + cfg.string() + " --seed 4 --out " + (dir / "c").string()) == 0);
    CHECK(same_tree(dir / "a", dir / "b"));
    CHECK(relative_files(dir / "a") == relative_files(dir / "c"));
    CHECK(schema_of(read_json(dir / "a/train/manifest.json")) == schema_of(read_json(dir / "c/train/manifest.json")));
    bool frames_differ = false;
    for (const auto& f : relative_files(dir / "a")) {
      if (f.extension() == ".png") frames_differ = frames_differ || test::read_bytes(dir / "a" / f) != test::read_bytes(dir / "c" / f);
    }
    CHECK(frames_differ);
  }

  TEST_CASE("train, eval and sweep rerun byte-identically") {
    const auto dir = test::temp_dir("cli_pipeline");
    const fs::path cfg = write_config(dir, kSmallConfig);
    const std::string data = (dir / "data").string();
    REQUIRE(run("gen-data --config " + cfg.string() + " --out " + data) == 0);
    for (const char* out : {"r1", "r2"}) {
      const fs::path o = dir / out;
      REQUIRE(run("train --quiet --config " + cfg.string() + " --data " + data + " --seed 5 --variant no_detector --out " +
                  (o / "runs").string()) == 0);
      const std::string ck = (o / "runs/5/checkpoints/step_00000004.ckpt").string();
      REQUIRE(fs::exists(ck));
      REQUIRE(run("eval --checkpoint " + ck + " --data " + data + " --out " + (o / "gt").string()) == 0);
      REQUIRE(run("eval --checkpoint " + ck + " --data " + data + " --target-mode random_patch --seed 2 --out " +
                  (o / "rp").string()) == 0);
      for (const char* kind : {"search", "target", "staleness"}) {
        REQUIRE(run("sweep --checkpoint " + ck + " --data " + data + " --kind " + kind + " --config " + cfg.string() + " --out " +
                    (o / "sweep").string()) == 0);
      }
    }
    CHECK(same_tree(dir / "r1", dir / "r2"));
    CHECK(fs::exists(dir / "r1/sweep/staleness.csv"));
    CHECK(fs::exists(dir / "r1/gt/summary.csv"));
    CHECK(read_json(dir / "r1/runs/5/experiment.json")["train"]["variant"] == "no_detector");
    CHECK(read_json(dir / "r1/runs/5/experiment.json")["loss"]["detector"] == 0.0);
  }

  TEST_CASE("train exits nonzero on a non-finite loss") {
    const auto dir = test::temp_dir("cli_nan");
    const fs::path cfg = write_config(dir, kSmallConfig);
    const std::string data = (dir / "data").string();
    REQUIRE(run("gen-data --config " + cfg.string() + " --out " + data) == 0);
    std::ofstream(dir / "diverge.json") << R"({
      "backbone": {"stage_channels": [2, 3, 3, 3], "feature_channels": 3, "projection_channels": 3,
                   "target_size": 16, "search_size": 32},
      "train": {"total_steps": 4, "batch_size": 2, "learning_rate": 1e30}
    })";
    CHECK(run("train --quiet --config " + (dir / "diverge.json").string() + " --data " + data + " --out " +
              (dir / "runs").string()) == 1);
  }

  TEST_CASE("report with a single run leaves standard errors empty") {
    const auto dir = test::temp_dir("cli_report");
    const fs::path cfg = write_config(dir, kSmallConfig);
    const std::string data = (dir / "data").string();
    REQUIRE(run("gen-data --config " + cfg.string() + " --out " + data) == 0);
    REQUIRE(run("train --quiet --config " + cfg.string() + " --data " + data + " --out " + (dir / "runs").string()) == 0);
    REQUIRE(run("report --runs " + (dir / "runs").string() + " --out " + (dir / "rep").string()) == 0);
    std::ifstream in(dir / "rep/ablation.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "variant,step,n_seeds,R_mean,R_se,A_mean,A_se");
    CHECK(row.rfind("with_detector,4,1,", 0) == 0);
    CHECK(row.back() == ',');
    CHECK(run("report --runs " + (dir / "nothing").string() + " --out " + (dir / "rep2").string()) == 1);
  }
}
