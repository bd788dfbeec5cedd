#include "siamtrack/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace siamtrack {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'I', 'A', 'M', 'C', 'K', 'P', '1'};

using nlohmann::json;

json config_to_json(const BackboneConfig& cfg) {
  return {{"stage_channels", cfg.stage_channels},
          {"feature_channels", cfg.feature_channels},
          {"projection_channels", cfg.projection_channels},
          {"init_seed", cfg.init_seed},
          {"target_size", cfg.target_size},
          {"search_size", cfg.search_size},
          {"stride", BackboneConfig::kStride}};
}

BackboneConfig config_from_json(const json& j) {
  BackboneConfig cfg;
  cfg.stage_channels = j.at("stage_channels").get<std::vector<int>>();
  cfg.feature_channels = j.at("feature_channels").get<int>();
  cfg.projection_channels = j.at("projection_channels").get<int>();
  cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
  cfg.target_size = j.at("target_size").get<int>();
  cfg.search_size = j.at("search_size").get<int>();
  if (j.at("stride").get<int>() != BackboneConfig::kStride) throw std::runtime_error("checkpoint: unsupported stride");
  cfg.validate();
  return cfg;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  json index = json::array();
  std::vector<const Tensor<float>*> payloads;
  std::uint64_t offset = 0;
  auto add = [&](const std::string& name, const Tensor<float>& t) {
    index.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    payloads.push_back(&t);
    offset += t.size() * sizeof(float);
  };
  checkpoint.params.for_each(add);
  for (const auto& [name, t] : checkpoint.extra) add(name, t);

  const json header = {{"format", "siamtrack-checkpoint"}, {"version", 1},
                       {"config", config_to_json(checkpoint.config)}, {"step", checkpoint.step},
                       {"metadata", checkpoint.metadata}, {"tensors", index}};
  const std::string text = header.dump();
  const std::uint64_t header_len = text.size();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Tensor<float>* t : payloads) {
    out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  std::uint64_t header_len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a siamtrack checkpoint: " + path.string());
  }
  if (header_len > (1u << 26)) throw std::runtime_error("checkpoint header too large: " + path.string());
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path.string());
  const json header = json::parse(text);
  if (header.at("format") != "siamtrack-checkpoint" || header.at("version") != 1) {
    throw std::runtime_error("unsupported checkpoint format: " + path.string());
  }

  Checkpoint ck;
  ck.config = config_from_json(header.at("config"));
  ck.step = header.at("step").get<std::int64_t>();
  ck.metadata = header.at("metadata").get<std::map<std::string, std::string>>();
  ck.params = Parameters<float>::zeros(ck.config);

  std::map<std::string, Tensor<float>*> model_slots;
  ck.params.for_each([&](const std::string& name, Tensor<float>& t) { model_slots[name] = &t; });

  for (const json& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<int>>();
    Tensor<float>* slot = nullptr;
    if (auto it = model_slots.find(name); it != model_slots.end()) {
      slot = it->second;
      if (slot->shape() != shape) throw std::runtime_error("checkpoint: shape mismatch for " + name);
      model_slots.erase(it);
    } else {
      slot = &ck.extra.emplace(name, Tensor<float>(shape)).first->second;
    }
    in.read(reinterpret_cast<char*>(slot->data()), static_cast<std::streamsize>(slot->size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint payload for " + name);
  }
  if (!model_slots.empty()) throw std::runtime_error("checkpoint missing tensor " + model_slots.begin()->first);
  return ck;
}

}  // namespace siamtrack
