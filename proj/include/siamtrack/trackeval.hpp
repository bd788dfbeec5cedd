#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "siamtrack/decode.hpp"
#include "siamtrack/synthdata.hpp"

namespace siamtrack {

enum class TargetMode { ground_truth, random_patch };

TargetMode target_mode_from_string(const std::string& name);
std::string to_string(TargetMode mode);

struct EvalConfig {
  int reset_skip = 5;  // failure at t re-initializes at t + reset_skip
  int burn_in = 10;    // frames after a re-init excluded from accuracy
  TargetMode target_mode = TargetMode::ground_truth;
  std::uint64_t seed = 0;  // random-patch placement

  void validate() const;
};

struct SequenceResult {
  std::string id;
  std::string split;
  int length = 0;
  int failures = 0;
  std::vector<double> ious;  // scored frames only

  double mean_iou() const;
};

struct EvalResult {
  std::vector<SequenceResult> sequences;
  double robustness = 0.0;  // sum(L * F) / sum(L)
  double accuracy = 0.0;    // mean IoU over all scored frames
};

/// Anything that can be (re)initialized on a frame and asked for a box.
class SequenceTracker {
 public:
  virtual ~SequenceTracker() = default;
  virtual void init(const Sequence& seq, int frame, const Box& box) = 0;
  virtual Box track(const Sequence& seq, int frame) = 0;
};

/// The network tracker. In ground_truth mode every (re)initialization crops a
/// fresh template at the given box. In random_patch mode the template is a
/// patch of frame 0 that does not overlap the ground truth, drawn once per
/// sequence; resets move the search state but keep that template.
class NetworkSequenceTracker : public SequenceTracker {
 public:
  NetworkSequenceTracker(const TrackerModel& model, const CropGeometry& geom, const SelectConfig& select,
                         TargetMode mode, std::uint64_t seed);
  void init(const Sequence& seq, int frame, const Box& box) override;
  Box track(const Sequence& seq, int frame) override;

  /// Template pixels used for the current sequence.
  const Image& template_crop() const { return template_crop_; }
  const CropSpec& template_spec() const { return template_spec_; }

 private:
  Tracker tracker_;
  TargetMode mode_;
  std::uint64_t seed_;
  const Sequence* current_ = nullptr;
  Image template_crop_;
  CropSpec template_spec_;
};

/// Reset-based evaluation of one sequence: failure when IoU with a visible
/// ground-truth box is 0. Frames where the target is not visible are tracked
/// but not scored.
SequenceResult evaluate_sequence(SequenceTracker& tracker, const Sequence& seq, const EvalConfig& cfg);

EvalResult aggregate(std::vector<SequenceResult> sequences);

EvalResult supervised_evaluate(SequenceTracker& tracker, const std::vector<Sequence>& dataset, const EvalConfig& cfg);

/// Convenience overload that builds a NetworkSequenceTracker. Sequences are
/// evaluated in parallel, each with its own tracker.
EvalResult supervised_evaluate(const TrackerModel& model, const std::vector<Sequence>& dataset,
                               const CropGeometry& geom, const EvalConfig& cfg, const SelectConfig& select);

struct RandomPatch {
  CropSpec spec;
  Image crop;
};

/// Target-crop-shaped squares placed uniformly inside the frame, rejecting
/// any that overlap the ground truth. Throws if no placement is found.
std::vector<RandomPatch> random_target_patches(const Image& frame, const Box& gt, int count, int crop_size, Rng& rng);

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};

/// Mean and standard error (sample standard deviation / sqrt(n)). Throws for
/// fewer than 2 values.
MeanSE mean_and_se(const std::vector<double>& values);

struct AblationRow {
  std::string variant;
  std::string split;
  MeanSE robustness;
  MeanSE accuracy;
};

/// results[variant][split] holds one EvalResult per seed. Adds a
/// "with_detector-no_detector" difference row per split when both exist.
std::vector<AblationRow> ablation_report(
    const std::map<std::string, std::map<std::string, std::vector<EvalResult>>>& results);

/// Per-sequence rows: model,seed,split,sequence,L,F,mean_iou.
void write_sequence_csv(const std::filesystem::path& path, const std::string& model, std::uint64_t seed,
                        const EvalResult& result, bool append = false);
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);

}  // namespace siamtrack
