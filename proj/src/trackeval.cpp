#include "siamtrack/trackeval.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace siamtrack {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

TargetMode target_mode_from_string(const std::string& name) {
  if (name == "gt" || name == "ground_truth") return TargetMode::ground_truth;
  if (name == "random_patch" || name == "random") return TargetMode::random_patch;
  throw std::invalid_argument("unknown target mode '" + name + "'");
}

std::string to_string(TargetMode mode) { return mode == TargetMode::ground_truth ? "gt" : "random_patch"; }

void EvalConfig::validate() const {
  if (reset_skip < 1) throw std::invalid_argument("eval: reset_skip must be >= 1");
  if (burn_in < 0) throw std::invalid_argument("eval: burn_in must be >= 0");
}

double SequenceResult::mean_iou() const {
  if (ious.empty()) return 0.0;
  return std::accumulate(ious.begin(), ious.end(), 0.0) / static_cast<double>(ious.size());
}

NetworkSequenceTracker::NetworkSequenceTracker(const TrackerModel& model, const CropGeometry& geom,
                                               const SelectConfig& select, TargetMode mode, std::uint64_t seed)
    : tracker_(model, geom, select), mode_(mode), seed_(seed) {}

void NetworkSequenceTracker::init(const Sequence& seq, int frame, const Box& box) {
  if (mode_ == TargetMode::ground_truth) {
    // Full re-initialization: the template comes from the (re)init frame.
    current_ = &seq;
    template_spec_ = make_target_crop_spec(box, tracker_.geometry().target_size);
    template_crop_ = crop_and_resize(seq.frames.at(frame), template_spec_);
  } else if (current_ != &seq || frame == 0) {
    current_ = &seq;
    Rng rng(mix_seed(seed_, fnv1a(seq.id)));
    auto patches = random_target_patches(seq.frames.front(), seq.annotations.front().box, 1,
                                         tracker_.geometry().target_size, rng);
    template_spec_ = patches.front().spec;
    template_crop_ = std::move(patches.front().crop);
  }
  tracker_.init_with_template(template_crop_, box);
}

Box NetworkSequenceTracker::track(const Sequence& seq, int frame) { return tracker_.step(seq.frames.at(frame)).box; }

SequenceResult evaluate_sequence(SequenceTracker& tracker, const Sequence& seq, const EvalConfig& cfg) {
  cfg.validate();
  if (seq.annotations.empty() || seq.annotations.front().frame != 0 || !seq.annotations.front().visible) {
    throw std::invalid_argument("sequence " + seq.id + " lacks a visible frame-0 annotation");
  }
  SequenceResult result;
  result.id = seq.id;
  result.split = seq.split;
  result.length = seq.size();

  int t = 0;
  bool initialized = false;
  int scored_after = 0;  // frames <= this index are excluded from accuracy
  while (t < seq.size()) {
    if (!initialized) {
      // Re-initialize on the next frame with a visible annotation.
      while (t < seq.size() && !seq.annotations[t].visible) ++t;
      if (t >= seq.size()) break;
      tracker.init(seq, t, seq.annotations[t].box);
      scored_after = t == 0 ? 0 : t + cfg.burn_in;
      initialized = true;
      ++t;
      continue;
    }
    const Box pred = tracker.track(seq, t);
    const Annotation& gt = seq.annotations[t];
    if (gt.visible) {
      const double overlap = iou(pred, gt.box);
      if (overlap <= 0.0) {
        ++result.failures;
        initialized = false;
        t += cfg.reset_skip;
        continue;
      }
      if (t > scored_after) result.ious.push_back(overlap);
    }
    ++t;
  }
  return result;
}

EvalResult aggregate(std::vector<SequenceResult> sequences) {
  EvalResult r;
  r.sequences = std::move(sequences);
  double weighted = 0.0;
  double length = 0.0;
  double iou_sum = 0.0;
  std::size_t iou_count = 0;
  for (const auto& s : r.sequences) {
    weighted += static_cast<double>(s.length) * s.failures;
    length += s.length;
    iou_sum += std::accumulate(s.ious.begin(), s.ious.end(), 0.0);
    iou_count += s.ious.size();
  }
  r.robustness = length > 0.0 ? weighted / length : 0.0;
  r.accuracy = iou_count > 0 ? iou_sum / static_cast<double>(iou_count) : 0.0;
  return r;
}

EvalResult supervised_evaluate(SequenceTracker& tracker, const std::vector<Sequence>& dataset, const EvalConfig& cfg) {
  std::vector<SequenceResult> results;
  results.reserve(dataset.size());
  for (const auto& seq : dataset) results.push_back(evaluate_sequence(tracker, seq, cfg));
  return aggregate(std::move(results));
}

EvalResult supervised_evaluate(const TrackerModel& model, const std::vector<Sequence>& dataset,
                               const CropGeometry& geom, const EvalConfig& cfg, const SelectConfig& select) {
  std::vector<SequenceResult> results(dataset.size());
  const int n = static_cast<int>(dataset.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      NetworkSequenceTracker tracker(model, geom, select, cfg.target_mode, cfg.seed);
      results[i] = evaluate_sequence(tracker, dataset[i], cfg);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return aggregate(std::move(results));
}

std::vector<RandomPatch> random_target_patches(const Image& frame, const Box& gt, int count, int crop_size, Rng& rng) {
  const CropSpec gt_spec = make_target_crop_spec(gt, crop_size);
  const double side = gt_spec.side;
  if (side > frame.width || side > frame.height) {
    throw std::invalid_argument("random_target_patches: frame smaller than the target crop");
  }
  std::uniform_real_distribution<double> ux(0.5 * side, frame.width - 0.5 * side);
  std::uniform_real_distribution<double> uy(0.5 * side, frame.height - 0.5 * side);
  const std::vector<float> pad = frame.channel_mean();
  constexpr int kMaxAttempts = 10000;
  std::vector<RandomPatch> out;
  for (int i = 0; i < count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      const CropSpec spec{{ux(rng), uy(rng)}, side, crop_size};
      if (iou(spec.window(), gt) > 0.0) continue;
      out.push_back({spec, crop_and_resize(frame, spec, pad)});
      placed = true;
    }
    if (!placed) throw std::runtime_error("random_target_patches: no patch placement avoids the target");
  }
  return out;
}

MeanSE mean_and_se(const std::vector<double>& values) {
  if (values.size() < 2) throw std::invalid_argument("standard error needs at least 2 seeds");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n), static_cast<int>(values.size())};
}

std::vector<AblationRow> ablation_report(
    const std::map<std::string, std::map<std::string, std::vector<EvalResult>>>& results) {
  std::vector<AblationRow> rows;
  std::map<std::string, std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>> values;
  for (const auto& [variant, splits] : results) {
    for (const auto& [split, runs] : splits) {
      std::vector<double> r, a;
      for (const auto& e : runs) {
        r.push_back(e.robustness);
        a.push_back(e.accuracy);
      }
      rows.push_back({variant, split, mean_and_se(r), mean_and_se(a)});
      values[variant][split] = {r, a};
    }
  }
  if (values.count("with_detector") && values.count("no_detector")) {
    for (const auto& [split, with] : values["with_detector"]) {
      auto it = values["no_detector"].find(split);
      if (it == values["no_detector"].end() || it->second.first.size() != with.first.size()) continue;
      std::vector<double> dr, da;
      for (std::size_t i = 0; i < with.first.size(); ++i) {
        dr.push_back(with.first[i] - it->second.first[i]);
        da.push_back(with.second[i] - it->second.second[i]);
      }
      rows.push_back({"with_detector-no_detector", split, mean_and_se(dr), mean_and_se(da)});
    }
  }
  return rows;
}

void write_sequence_csv(const std::filesystem::path& path, const std::string& model, std::uint64_t seed,
                        const EvalResult& result, bool append) {
  const bool header = !append || !std::filesystem::exists(path);
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (header) out << "model,seed,split,sequence,L,F,mean_iou\n";
  for (const auto& s : result.sequences) {
    out << model << "," << seed << "," << s.split << "," << s.id << "," << s.length << "," << s.failures << ","
        << fmt(s.mean_iou()) << "\n";
  }
}

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "variant,split,n_seeds,R_mean,R_se,A_mean,A_se\n";
  for (const auto& r : rows) {
    out << r.variant << "," << r.split << "," << r.robustness.n << "," << fmt(r.robustness.mean) << ","
        << fmt(r.robustness.se) << "," << fmt(r.accuracy.mean) << "," << fmt(r.accuracy.se) << "\n";
  }
}

}  // namespace siamtrack
