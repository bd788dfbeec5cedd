#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "siamtrack/config.hpp"
#include "test_support.hpp"

using namespace siamtrack;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_experiment_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("empty document gives the desk defaults") {
    const ExperimentConfig cfg = parse_experiment_config("{}");
    const TrainConfig defaults;
    CHECK(cfg.train.total_steps == defaults.total_steps);
    CHECK(cfg.train.learning_rate == defaults.learning_rate);
    CHECK(cfg.train.batch_size == defaults.batch_size);
    CHECK(cfg.train.geometry.search_size == cfg.train.backbone.search_size);
    CHECK(cfg.train.geometry.target_size == cfg.train.backbone.target_size);
    CHECK(cfg.data.train.seed != cfg.data.eval.seed);
  }

  TEST_CASE("unknown keys are reported with their path") {
    CHECK(contains(error_of(R"({"bogus":1})"), "config.bogus"));
    CHECK(contains(error_of(R"({"train":{"total_step":5}})"), "config.train.total_step"));
    CHECK(contains(error_of(R"({"sampler":{"augment":{"blur":0.1}}})"), "config.sampler.augment.blur"));
    CHECK(contains(error_of(R"({"data":{"train":{"splits":[{"kind":"easy","n":2}]}}})"), "splits[0].n"));
  }

  TEST_CASE("type and range errors name the field") {
    CHECK(contains(error_of(R"({"train":{"batch_size":"8"}})"), "config.train.batch_size"));
    CHECK(contains(error_of(R"({"train":{"batch_size":2.5}})"), "config.train.batch_size"));
    CHECK(contains(error_of(R"({"backbone":{"init_seed":-1}})"), "config.backbone.init_seed"));
    CHECK(contains(error_of(R"({"backbone":{"stage_channels":[16,"x"]}})"), "stage_channels[1]"));
    CHECK(contains(error_of(R"({"eval":{"target_mode":"psychic"}})"), "config.eval.target_mode"));
    CHECK(contains(error_of(R"({"train":{"variant":"other"}})"), "config.train.variant"));
    CHECK(contains(error_of(R"({"geometry":{"search_ratio":0.5}})"), "config.geometry.search_ratio"));
    CHECK(contains(error_of(R"({"data":{"train":{"splits":[{"kind":"weird","count":1}]}}})"), "splits[0].kind"));
    CHECK(contains(error_of(R"({"train":5})"), "config.train"));
    CHECK_FALSE(error_of("{not json").empty());
    CHECK(contains(error_of(R"({"train":{"total_steps":-1}})"), "config"));
  }

  TEST_CASE("resolved document round trips") {
    const std::string text = R"({
      "data": {"train": {"seed": 5, "num_frames": 12, "splits": [{"kind": "hard", "count": 3}]}},
      "backbone": {"stage_channels": [8, 8, 8, 8], "feature_channels": 8, "projection_channels": 8},
      "sampler": {"target_rule": "first_frame", "augment": {"hue": 0.0}},
      "eval": {"target_mode": "random_patch", "burn_in": 7},
      "sweep": {"extent": 1.0, "step": 0.25},
      "train": {"total_steps": 40, "learning_rate": 0.001, "variant": "no_detector"}
    })";
    const ExperimentConfig a = parse_experiment_config(text);
    CHECK(a.data.train.seed == 5);
    CHECK(a.data.train.splits.size() == 1);
    CHECK(a.train.sampler.target_rule == TargetRule::first_frame);
    CHECK(a.train.eval.burn_in == 7);
    CHECK(a.sweep.step == 0.25);
    CHECK(a.train.variant == Variant::no_detector);
    const std::string resolved = experiment_config_to_string(a);
    const ExperimentConfig b = parse_experiment_config(resolved);
    CHECK(experiment_config_to_string(b) == resolved);
    CHECK(train_config_to_string(a.train) == train_config_to_string(b.train));
  }

  TEST_CASE("load reports the file name") {
    const auto dir = test::temp_dir("config_load");
    std::ofstream(dir / "bad.json") << R"({"train":{"nope":1}})";
    try {
      load_experiment_config(dir / "bad.json");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(contains(e.what(), "bad.json"));
      CHECK(contains(e.what(), "config.train.nope"));
    }
    CHECK_THROWS_AS(load_experiment_config(dir / "missing.json"), ConfigError);
  }

  TEST_CASE("shipped configs parse") {
    int n = 0;
    for (const auto& e : std::filesystem::directory_iterator(SIAMTRACK_CONFIG_DIR)) {
      if (e.path().extension() != ".json") continue;
      CAPTURE(e.path().string());
      CHECK_NOTHROW(load_experiment_config(e.path()));
      ++n;
    }
    CHECK(n >= 4);
    CHECK(load_experiment_config(std::filesystem::path(SIAMTRACK_CONFIG_DIR) / "desk_long.json").train.lr_drop_step() ==
          19000);
  }
}
