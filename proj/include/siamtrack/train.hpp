#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "siamtrack/checkpoint.hpp"
#include "siamtrack/decode.hpp"
#include "siamtrack/model.hpp"
#include "siamtrack/synthdata.hpp"
#include "siamtrack/trackeval.hpp"

namespace siamtrack {

enum class Variant { with_detector, no_detector };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant variant);

struct TrainConfig {
  int total_steps = 2000;
  double learning_rate = 1e-3;  // 2000-step budget; the 20k-step profile uses 1e-4
  double lr_drop_fraction = 0.95;  // lr *= lr_drop_factor from floor(fraction * total_steps)
  double lr_drop_factor = 0.1;
  int batch_size = 8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  LossWeights weights;
  int eval_every = 500;       // 0 disables intermediate evaluation
  int checkpoint_every = 0;   // extra checkpoints between eval points; 0 = eval points only
  std::uint64_t seed = 0;
  Variant variant = Variant::with_detector;
  SamplerConfig sampler;
  CropGeometry geometry;
  BackboneConfig backbone;
  EvalConfig eval;
  SelectConfig select;

  int lr_drop_step() const;
  void validate() const;
};

/// Head biases set to the data prior: heat and detector logits to the
/// positive-cell fraction of one disc, corner offsets to the half extent of a
/// square target in the search crop.
void apply_head_prior(Parameters<float>& params, const CropGeometry& geom);

/// Piecewise constant: learning_rate before lr_drop_step, then scaled once.
double lr_at(int step, const TrainConfig& cfg);

/// Per-example loss and (optionally) parameter gradients. The detector branch
/// is evaluated only when `with_detector` is set; otherwise its gradients are
/// left untouched. grads must be zero-initialized by the caller.
template <typename T>
LossTerms example_loss(const Parameters<T>& params, const BackboneConfig& cfg, const TrainingExample& ex,
                       const LossWeights& weights, bool with_detector, Parameters<T>* grads);

/// Training examples for one step. Example b uses an rng derived from
/// (seed, step, b), so a batch can be rebuilt from the step number alone.
std::vector<TrainingExample> make_batch(const std::vector<Sequence>& dataset, const TrainConfig& cfg, int step);

struct AdamState {
  Parameters<float> m;
  Parameters<float> v;
  std::int64_t t = 0;  // completed updates
};

/// One Adam update with bias correction. Detector-head tensors are left
/// alone when skip_detector is set.
void adam_update(Parameters<float>& params, const Parameters<float>& grads, AdamState& state, double lr,
                 const TrainConfig& cfg, bool skip_detector);

struct MetricRow {
  int step = 0;
  LossTerms loss;  // mean over the training batches since the previous row
  double robustness = 0.0;
  double accuracy = 0.0;
};

struct RunRecord {
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<MetricRow> rows;
  std::vector<std::filesystem::path> checkpoints;
  std::string config_json;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  std::filesystem::path run_dir;  // empty: nothing written
  std::optional<std::filesystem::path> resume;
  bool verbose = false;
};

/// Full training loop with periodic supervised evaluation on `eval_data`.
/// Rows are written at step 0, every eval_every steps and at total_steps.
/// Throws NonFiniteLoss (after writing a diagnostic checkpoint) if a batch
/// loss is NaN or infinite.
RunRecord train_run(const TrainConfig& cfg, const std::vector<Sequence>& train_data,
                    const std::vector<Sequence>& eval_data, const TrainOptions& options = {});

/// Parameters at the end of a run, read back from its last checkpoint.
TrackerModel model_from_checkpoint(const std::filesystem::path& path);

struct CurvePoint {
  int step = 0;
  MeanSE robustness;
  MeanSE accuracy;
  MeanSE loss_total;
};

/// Pointwise mean and standard error across runs. Throws for fewer than two
/// runs or if the runs were evaluated at different steps.
std::vector<CurvePoint> multi_seed(const std::vector<RunRecord>& runs);

/// step,variant,seed,loss_total,loss_heat,loss_offset,loss_det,R,A
void write_metrics_csv(const std::filesystem::path& path, const RunRecord& record);
RunRecord read_metrics_csv(const std::filesystem::path& path);

}  // namespace siamtrack
