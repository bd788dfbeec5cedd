#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "siamtrack/decode.hpp"
#include "siamtrack/model.hpp"
#include "siamtrack/synthdata.hpp"

namespace siamtrack {

struct SweepConfig {
  double extent = 2.0;  // displacement grid spans [-extent, extent] in units of the box size factor
  double step = 0.2;
  int max_dt = 50;
  int pair_stride = 1;  // use every n-th frame pair / anchor of each sequence

  /// Symmetric axis values; index cells() / 2 is exactly 0.
  std::vector<double> axis() const;
  int cells() const;
  void validate() const;
};

/// Mean normalized IoU over a displacement grid. Row-major: value(ix, iy)
/// is at iy * axis_x.size() + ix.
struct SweepGrid {
  std::string kind;
  std::vector<double> axis_x;
  std::vector<double> axis_y;
  std::vector<double> mean;
  std::vector<long> count;
  long total_pairs = 0;
  long dropped_pairs = 0;  // baseline IoU was 0

  double value(int ix, int iy) const { return mean[static_cast<std::size_t>(iy) * axis_x.size() + ix]; }
};

/// Staleness curve: dt -> mean IoU normalized by the dt = 1 value.
struct SweepCurve {
  std::vector<int> dt;
  std::vector<double> mean;
  std::vector<long> count;
  long total_anchors = 0;
  long dropped_anchors = 0;
};

/// Target from ground truth at t; the search crop on t + 1 is centered on the
/// box at t and then shifted by d * size_factor. The selection prior moves
/// with the crop. IoU against ground truth at t + 1, normalized per pair by
/// the (0, 0) value.
SweepGrid search_sweep(const TrackerModel& model, const std::vector<Sequence>& dataset, const SweepConfig& cfg,
                       const CropGeometry& geom, const SelectConfig& select);

/// Same pairs, search crop fixed at the box from t; the target crop center is
/// shifted instead.
SweepGrid target_sweep(const TrackerModel& model, const std::vector<Sequence>& dataset, const SweepConfig& cfg,
                       const CropGeometry& geom, const SelectConfig& select);

/// Anchor frame t: search crop centered on the box at t - 1, target from the
/// box at t - dt for dt = 1..max_dt. Anchors with t < max_dt are skipped.
SweepCurve staleness_sweep(const TrackerModel& model, const std::vector<Sequence>& dataset, const SweepConfig& cfg,
                           const CropGeometry& geom, const SelectConfig& select);

struct GridSummary {
  double center = 0.0;
  double plateau = 0.0;    // mean over the outer radial bins
  double dip = 0.0;        // depth of the lowest radial bin below min(center, plateau)
  double dip_radius = 0.0;
  std::vector<std::pair<double, double>> radial;  // (radius, mean of cells in that bin)
};

struct CurveSummary {
  double first = 0.0;
  double last = 0.0;
  double asymptote = 0.0;  // mean over the last quarter of the curve
};

/// Radial profile over |d| (bins of one grid step). Cells with no samples
/// are ignored. Throws on an empty grid.
GridSummary summarize_grid(const SweepGrid& grid);
CurveSummary summarize_curve(const SweepCurve& curve);

/// axis_x,axis_y,mean_norm_iou,n_samples (curves: dt,mean_norm_iou,n_samples).
void write_grid_csv(const std::filesystem::path& path, const SweepGrid& grid);
void write_curve_csv(const std::filesystem::path& path, const SweepCurve& curve);
SweepGrid read_grid_csv(const std::filesystem::path& path);

/// CSV + PNG + summary JSON for each sweep into `dir`, named by `stem`.
void write_grid_report(const std::filesystem::path& dir, const std::string& stem, const SweepGrid& grid);
void write_curve_report(const std::filesystem::path& dir, const std::string& stem, const SweepCurve& curve);

}  // namespace siamtrack
