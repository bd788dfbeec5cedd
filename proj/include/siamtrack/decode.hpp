#pragma once

#include <optional>
#include <vector>

#include "siamtrack/geometry.hpp"
#include "siamtrack/model.hpp"
#include "siamtrack/synthdata.hpp"

namespace siamtrack {

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

struct Proposal {
  Box box;
  double score = 0.0;  // positive-class probability at the mode
  Cell mode;
};

/// Proposal decoding and temporal-consistency selection. k and lambda are
/// the published SiamRPN defaults and are not tuned here.
struct SelectConfig {
  int num_proposals = 5;
  int nms_window = 6;
  double penalty_k = 0.055;
  double window_influence = 0.42;

  void validate() const;
};

/// Window offsets covered around a mode: [lo, hi] in both axes. For the even
/// 6-cell window this is [-3, +2].
struct WindowExtent {
  int lo = 0;
  int hi = 0;
};
WindowExtent window_extent(int window);

/// Greedy NMS over a row-major g x g grid: take the largest unsuppressed
/// positive cell (ties to the smallest (row, col)), suppress its window,
/// repeat until n modes or nothing is left.
std::vector<Cell> top_modes(const std::vector<double>& heat, int grid, const SelectConfig& cfg);

/// One proposal per mode. Each cell in the mode's window votes for the
/// corners at cell + offsets; the votes are averaged. Boxes are clipped to
/// the search window `spec` and sorted by score, descending.
std::vector<Proposal> proposals_from_output(const TrackerOutput& out, const CropSpec& spec, int stride,
                                            const SelectConfig& cfg);

/// score * exp(-k * (max(r/r', r'/r) * max(s/s', s'/s) - 1))
///       * ((1 - lambda) + lambda * hann(center offset / (search side / 2)))
/// with r the aspect ratio, s the context-padded crop scale and primes from
/// prev_box.
double penalized_score(const Proposal& p, const Box& prev_box, const CropSpec& spec, const SelectConfig& cfg);

/// Highest penalized score wins; ties by raw score, then (y, x) of the center.
/// Throws std::invalid_argument on an empty list.
Proposal select_proposal(const std::vector<Proposal>& proposals, const Box& prev_box, const CropSpec& spec,
                         const SelectConfig& cfg);

/// Stateful single-target tracker with a fixed target template.
class Tracker {
 public:
  Tracker(const TrackerModel& model, const CropGeometry& geom, const SelectConfig& select);

  /// Crops the template from `frame` at `box` and resets the state.
  void init(const Image& frame, const Box& box);
  /// Uses an externally supplied template crop; the state box is still `box`.
  void init_with_template(const Image& target_crop, const Box& box);

  /// Search crop centered on the state box; the selected proposal becomes
  /// the new state. Falls back to the previous box if no mode is found.
  Proposal step(const Image& frame);

  const Box& state() const { return state_; }
  const CropGeometry& geometry() const { return geom_; }

  /// Template features for a crop of `frame` at `spec` (target-branch size).
  Tensor<float> target_features(const Image& frame, const CropSpec& spec) const;
  Tensor<float> template_features(const Image& target_crop) const;
  /// Raw network output for a given template and search crop.
  TrackerOutput infer(const Tensor<float>& target_features, const Image& frame, const CropSpec& search_spec) const;
  /// Decode + select for an explicit search crop.
  Proposal predict(const Tensor<float>& target_features, const Image& frame, const CropSpec& search_spec,
                   const Box& prev_box) const;

 private:
  const TrackerModel* model_;
  CropGeometry geom_;
  SelectConfig select_;
  Tensor<float> template_;
  Box state_;
};

struct TrackedFrame {
  Box box;
  double score = 0.0;
};

/// Recursive tracking from init_box on frame 0. Every frame, including
/// frame 0, is searched around the previous output.
std::vector<TrackedFrame> track_sequence(const Sequence& seq, const Box& init_box, const TrackerModel& model,
                                         const CropGeometry& geom, const SelectConfig& select,
                                         const Image* template_override = nullptr);

/// JSON-lines: {sequence_id, frame, x_min, y_min, x_max, y_max, score}.
void write_tracking_results(const std::filesystem::path& path, const std::string& sequence_id,
                            const std::vector<TrackedFrame>& frames);

}  // namespace siamtrack
