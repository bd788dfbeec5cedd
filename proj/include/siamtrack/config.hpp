#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "siamtrack/perturb.hpp"
#include "siamtrack/synthdata.hpp"
#include "siamtrack/train.hpp"

namespace siamtrack {

/// Invalid or unknown configuration content. Messages carry the JSON path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataConfig {
  DatasetSpec train;
  DatasetSpec eval;
};

/// Everything an experiment needs. The JSON document has the sections
/// data, backbone, geometry, sampler, loss, select, eval, sweep and train;
/// all are optional and default to the desk profile. Unknown keys are errors.
struct ExperimentConfig {
  DataConfig data;
  TrainConfig train;
  SweepConfig sweep;
};

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Fully resolved document, pretty-printed, keys in schema order.
std::string experiment_config_to_string(const ExperimentConfig& cfg);

/// Compact canonical form of the training-relevant sections.
std::string train_config_to_string(const TrainConfig& cfg);

}  // namespace siamtrack
