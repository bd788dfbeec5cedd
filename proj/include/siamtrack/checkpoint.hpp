#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "siamtrack/model.hpp"

namespace siamtrack {

/// Everything needed to run a trained tracker or resume training.
///
/// On disk: an 8-byte magic, a little-endian u64 header length, a compact
/// JSON header (config, step, metadata, tensor index), then raw little-endian
/// float32 payloads in index order. Model tensors use their canonical names;
/// `extra` holds auxiliary tensors such as optimizer moments.
struct Checkpoint {
  BackboneConfig config;
  std::int64_t step = 0;
  Parameters<float> params;
  std::map<std::string, Tensor<float>> extra;
  std::map<std::string, std::string> metadata;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace siamtrack
