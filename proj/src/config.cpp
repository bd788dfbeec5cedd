#include "siamtrack/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace siamtrack {

namespace {

using json = nlohmann::ordered_json;

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    convert(j_.at(key), path_ + "." + key, out);
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  Section child(const std::string& key) {
    used_.insert(key);
    return Section(j_.at(key), path_ + "." + key);
  }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(path_ + "." + it.key() + ": unknown key");
    }
  }

 private:
  static void convert(const json& v, const std::string& path, int& out) {
    if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    out = v.get<int>();
  }
  static void convert(const json& v, const std::string& path, std::uint64_t& out) {
    if (!v.is_number_unsigned()) throw ConfigError(path + ": expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void convert(const json& v, const std::string& path, double& out) {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    out = v.get<double>();
  }
  static void convert(const json& v, const std::string& path, std::string& out) {
    if (!v.is_string()) throw ConfigError(path + ": expected a string");
    out = v.get<std::string>();
  }
  static void convert(const json& v, const std::string& path, std::vector<int>& out) {
    if (!v.is_array()) throw ConfigError(path + ": expected an array of integers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      int x = 0;
      convert(v[i], path + "[" + std::to_string(i) + "]", x);
      out.push_back(x);
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename F>
void wrap(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void read_dataset_spec(Section s, DatasetSpec& spec) {
  s.get("seed", spec.seed);
  s.get("num_frames", spec.num_frames);
  s.get("width", spec.width);
  s.get("height", spec.height);
  if (s.has("splits")) {
    const json& splits = s.raw("splits");
    if (!splits.is_array()) throw ConfigError("splits: expected an array");
    spec.splits.clear();
    for (std::size_t i = 0; i < splits.size(); ++i) {
      Section e(splits[i], "splits[" + std::to_string(i) + "]");
      std::string kind = "easy";
      int count = 0;
      e.get("kind", kind);
      e.get("count", count);
      e.finish();
      SceneKind k;
      wrap("splits[" + std::to_string(i) + "].kind", [&] { k = scene_kind_from_string(kind); });
      if (count < 0) throw ConfigError("splits[" + std::to_string(i) + "].count: must be >= 0");
      spec.splits.emplace_back(k, count);
    }
  }
  s.finish();
  if (spec.num_frames < 2) throw ConfigError("data: num_frames must be >= 2");
  if (spec.width < 16 || spec.height < 16) throw ConfigError("data: frames must be at least 16x16");
}

json dataset_spec_json(const DatasetSpec& spec) {
  json splits = json::array();
  for (const auto& [kind, count] : spec.splits) splits.push_back({{"kind", to_string(kind)}, {"count", count}});
  return {{"seed", spec.seed},     {"num_frames", spec.num_frames}, {"width", spec.width},
          {"height", spec.height}, {"splits", splits}};
}

json backbone_json(const BackboneConfig& b) {
  return {{"stage_channels", b.stage_channels}, {"feature_channels", b.feature_channels},
          {"projection_channels", b.projection_channels}, {"init_seed", b.init_seed},
          {"target_size", b.target_size},       {"search_size", b.search_size}};
}

json geometry_json(const CropGeometry& g) {
  return {{"search_ratio", g.search_ratio}, {"disc_radius", g.disc_radius}};
}

json sampler_json(const SamplerConfig& s) {
  const AugmentConfig& a = s.augment;
  return {{"subsequence_length", s.subsequence_length},
          {"target_rule", s.target_rule == TargetRule::first_frame ? "first_frame" : "random_causal"},
          {"augment",
           {{"search_translation", a.search_translation},
            {"search_scale", a.search_scale},
            {"target_translation", a.target_translation},
            {"target_scale", a.target_scale},
            {"contrast", a.contrast},
            {"hue", a.hue},
            {"saturation", a.saturation}}}};
}

json loss_json(const LossWeights& w) {
  return {{"heatmap", w.heatmap}, {"offset", w.offset}, {"detector", w.detector}};
}

json select_json(const SelectConfig& s) {
  return {{"num_proposals", s.num_proposals}, {"nms_window", s.nms_window}, {"penalty_k", s.penalty_k},
          {"window_influence", s.window_influence}};
}

json eval_json(const EvalConfig& e) {
  return {{"reset_skip", e.reset_skip}, {"burn_in", e.burn_in}, {"target_mode", to_string(e.target_mode)},
          {"seed", e.seed}};
}

json sweep_json(const SweepConfig& s) {
  return {{"extent", s.extent}, {"step", s.step}, {"max_dt", s.max_dt}, {"pair_stride", s.pair_stride}};
}

json train_json(const TrainConfig& t) {
  return {{"total_steps", t.total_steps},
          {"learning_rate", t.learning_rate},
          {"lr_drop_fraction", t.lr_drop_fraction},
          {"lr_drop_factor", t.lr_drop_factor},
          {"batch_size", t.batch_size},
          {"adam_beta1", t.adam_beta1},
          {"adam_beta2", t.adam_beta2},
          {"adam_epsilon", t.adam_epsilon},
          {"eval_every", t.eval_every},
          {"checkpoint_every", t.checkpoint_every},
          {"seed", t.seed},
          {"variant", to_string(t.variant)}};
}

ExperimentConfig parse(const json& doc) {
  ExperimentConfig cfg;
  // Desk-profile evaluation split differs from the training split by seed.
  cfg.data.eval.seed = 1;
  Section root(doc, "config");
  TrainConfig& t = cfg.train;

  if (root.has("data")) {
    Section data = root.child("data");
    if (data.has("train")) read_dataset_spec(data.child("train"), cfg.data.train);
    if (data.has("eval")) read_dataset_spec(data.child("eval"), cfg.data.eval);
    data.finish();
  }
  if (root.has("backbone")) {
    Section s = root.child("backbone");
    s.get("stage_channels", t.backbone.stage_channels);
    s.get("feature_channels", t.backbone.feature_channels);
    s.get("projection_channels", t.backbone.projection_channels);
    s.get("init_seed", t.backbone.init_seed);
    s.get("target_size", t.backbone.target_size);
    s.get("search_size", t.backbone.search_size);
    s.finish();
  }
  wrap("config.backbone", [&] { t.backbone.validate(); });
  t.geometry.target_size = t.backbone.target_size;
  t.geometry.search_size = t.backbone.search_size;
  if (root.has("geometry")) {
    Section s = root.child("geometry");
    s.get("search_ratio", t.geometry.search_ratio);
    s.get("disc_radius", t.geometry.disc_radius);
    s.finish();
  }
  if (!(t.geometry.search_ratio >= 1.0)) throw ConfigError("config.geometry.search_ratio: must be >= 1");
  if (!(t.geometry.disc_radius > 0.0)) throw ConfigError("config.geometry.disc_radius: must be > 0");
  if (root.has("sampler")) {
    Section s = root.child("sampler");
    s.get("subsequence_length", t.sampler.subsequence_length);
    std::string rule = t.sampler.target_rule == TargetRule::first_frame ? "first_frame" : "random_causal";
    s.get("target_rule", rule);
    if (rule == "first_frame") {
      t.sampler.target_rule = TargetRule::first_frame;
    } else if (rule == "random_causal") {
      t.sampler.target_rule = TargetRule::random_causal;
    } else {
      throw ConfigError("config.sampler.target_rule: expected first_frame or random_causal");
    }
    if (s.has("augment")) {
      Section a = s.child("augment");
      AugmentConfig& g = t.sampler.augment;
      a.get("search_translation", g.search_translation);
      a.get("search_scale", g.search_scale);
      a.get("target_translation", g.target_translation);
      a.get("target_scale", g.target_scale);
      a.get("contrast", g.contrast);
      a.get("hue", g.hue);
      a.get("saturation", g.saturation);
      a.finish();
    }
    s.finish();
  }
  if (root.has("loss")) {
    Section s = root.child("loss");
    s.get("heatmap", t.weights.heatmap);
    s.get("offset", t.weights.offset);
    s.get("detector", t.weights.detector);
    s.finish();
  }
  if (root.has("select")) {
    Section s = root.child("select");
    s.get("num_proposals", t.select.num_proposals);
    s.get("nms_window", t.select.nms_window);
    s.get("penalty_k", t.select.penalty_k);
    s.get("window_influence", t.select.window_influence);
    s.finish();
  }
  if (root.has("eval")) {
    Section s = root.child("eval");
    s.get("reset_skip", t.eval.reset_skip);
    s.get("burn_in", t.eval.burn_in);
    std::string mode = to_string(t.eval.target_mode);
    s.get("target_mode", mode);
    wrap("config.eval.target_mode", [&] { t.eval.target_mode = target_mode_from_string(mode); });
    s.get("seed", t.eval.seed);
    s.finish();
  }
  if (root.has("sweep")) {
    Section s = root.child("sweep");
    s.get("extent", cfg.sweep.extent);
    s.get("step", cfg.sweep.step);
    s.get("max_dt", cfg.sweep.max_dt);
    s.get("pair_stride", cfg.sweep.pair_stride);
    s.finish();
  }
  wrap("config.sweep", [&] { cfg.sweep.validate(); });
  if (root.has("train")) {
    Section s = root.child("train");
    s.get("total_steps", t.total_steps);
    s.get("learning_rate", t.learning_rate);
    s.get("lr_drop_fraction", t.lr_drop_fraction);
    s.get("lr_drop_factor", t.lr_drop_factor);
    s.get("batch_size", t.batch_size);
    s.get("adam_beta1", t.adam_beta1);
    s.get("adam_beta2", t.adam_beta2);
    s.get("adam_epsilon", t.adam_epsilon);
    s.get("eval_every", t.eval_every);
    s.get("checkpoint_every", t.checkpoint_every);
    s.get("seed", t.seed);
    std::string variant = to_string(t.variant);
    s.get("variant", variant);
    wrap("config.train.variant", [&] { t.variant = variant_from_string(variant); });
    s.finish();
  }
  root.finish();
  wrap("config", [&] { t.validate(); });
  return cfg;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  try {
    return parse(doc);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_experiment_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string experiment_config_to_string(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  json doc = {{"data", {{"train", dataset_spec_json(cfg.data.train)}, {"eval", dataset_spec_json(cfg.data.eval)}}},
              {"backbone", backbone_json(t.backbone)},
              {"geometry", geometry_json(t.geometry)},
              {"sampler", sampler_json(t.sampler)},
              {"loss", loss_json(t.weights)},
              {"select", select_json(t.select)},
              {"eval", eval_json(t.eval)},
              {"sweep", sweep_json(cfg.sweep)},
              {"train", train_json(t)}};
  return doc.dump(2);
}

std::string train_config_to_string(const TrainConfig& t) {
  json doc = {{"backbone", backbone_json(t.backbone)}, {"geometry", geometry_json(t.geometry)},
              {"sampler", sampler_json(t.sampler)},    {"loss", loss_json(t.weights)},
              {"select", select_json(t.select)},       {"eval", eval_json(t.eval)},
              {"train", train_json(t)}};
  return doc.dump();
}

}  // namespace siamtrack
