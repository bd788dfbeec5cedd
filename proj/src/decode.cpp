#include "siamtrack/decode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include <nlohmann/json.hpp>

namespace siamtrack {

namespace {

double context_scale(const Box& b) {
  const double p = 0.5 * (b.width() + b.height());
  return std::sqrt((b.width() + p) * (b.height() + p));
}

double aspect_ratio(const Box& b) { return b.height() > 0.0 ? b.width() / b.height() : 0.0; }

double change(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) return 1.0;
  return std::max(a / b, b / a);
}

double hann(double normalized_offset) {
  const double d = std::min(std::abs(normalized_offset), 1.0);
  return 0.5 + 0.5 * std::cos(std::numbers::pi * d);
}

Box ordered(const Box& b) {
  return {std::min(b.x_min, b.x_max), std::min(b.y_min, b.y_max), std::max(b.x_min, b.x_max),
          std::max(b.y_min, b.y_max)};
}

}  // namespace

void SelectConfig::validate() const {
  if (num_proposals < 1) throw std::invalid_argument("select: num_proposals must be >= 1");
  if (nms_window < 1) throw std::invalid_argument("select: nms_window must be >= 1");
  if (penalty_k < 0.0) throw std::invalid_argument("select: penalty_k must be >= 0");
  if (window_influence < 0.0 || window_influence > 1.0) {
    throw std::invalid_argument("select: window_influence must lie in [0, 1]");
  }
}

WindowExtent window_extent(int window) { return {-(window / 2), (window - 1) / 2}; }

std::vector<Cell> top_modes(const std::vector<double>& heat, int grid, const SelectConfig& cfg) {
  if (heat.size() != static_cast<std::size_t>(grid) * grid) throw std::invalid_argument("top_modes: grid mismatch");
  const WindowExtent w = window_extent(cfg.nms_window);
  std::vector<char> suppressed(heat.size(), 0);
  std::vector<Cell> modes;
  while (static_cast<int>(modes.size()) < cfg.num_proposals) {
    int best = -1;
    for (std::size_t i = 0; i < heat.size(); ++i) {
      if (suppressed[i] || !(heat[i] > 0.0)) continue;
      if (best < 0 || heat[i] > heat[best]) best = static_cast<int>(i);
    }
    if (best < 0) break;
    const Cell c{best / grid, best % grid};
    modes.push_back(c);
    for (int r = std::max(0, c.row + w.lo); r <= std::min(grid - 1, c.row + w.hi); ++r) {
      for (int q = std::max(0, c.col + w.lo); q <= std::min(grid - 1, c.col + w.hi); ++q) {
        suppressed[static_cast<std::size_t>(r) * grid + q] = 1;
      }
    }
  }
  return modes;
}

std::vector<Proposal> proposals_from_output(const TrackerOutput& out, const CropSpec& spec, int stride,
                                            const SelectConfig& cfg) {
  const int g = out.grid();
  std::vector<double> heat(static_cast<std::size_t>(g) * g);
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) heat[static_cast<std::size_t>(r) * g + c] = out.heat_probability(r, c);
  }
  const WindowExtent w = window_extent(cfg.nms_window);
  const Box window = spec.window();
  std::vector<Proposal> proposals;
  for (const Cell& m : top_modes(heat, g, cfg)) {
    double votes[4] = {0.0, 0.0, 0.0, 0.0};
    int count = 0;
    for (int r = std::max(0, m.row + w.lo); r <= std::min(g - 1, m.row + w.hi); ++r) {
      for (int c = std::max(0, m.col + w.lo); c <= std::min(g - 1, m.col + w.hi); ++c) {
        const auto o = out.offsets(r, c);
        votes[0] += c + o[0];
        votes[1] += r + o[1];
        votes[2] += c + o[2];
        votes[3] += r + o[3];
        ++count;
      }
    }
    const Point tl = grid_to_frame(Point{votes[0] / count, votes[1] / count}, spec, stride);
    const Point br = grid_to_frame(Point{votes[2] / count, votes[3] / count}, spec, stride);
    Proposal p;
    p.box = ordered(Box{tl.x, tl.y, br.x, br.y}).clipped(window);
    p.score = heat[static_cast<std::size_t>(m.row) * g + m.col];
    p.mode = m;
    proposals.push_back(p);
  }
  std::stable_sort(proposals.begin(), proposals.end(),
                   [](const Proposal& a, const Proposal& b) { return a.score > b.score; });
  return proposals;
}

double penalized_score(const Proposal& p, const Box& prev_box, const CropSpec& spec, const SelectConfig& cfg) {
  const double shape_change =
      change(aspect_ratio(p.box), aspect_ratio(prev_box)) * change(context_scale(p.box), context_scale(prev_box));
  const double penalty = std::exp(-cfg.penalty_k * (shape_change - 1.0));
  const double half = 0.5 * spec.side;
  const Point pc = p.box.center();
  const Point qc = prev_box.center();
  const double window = hann((pc.x - qc.x) / half) * hann((pc.y - qc.y) / half);
  return p.score * penalty * ((1.0 - cfg.window_influence) + cfg.window_influence * window);
}

Proposal select_proposal(const std::vector<Proposal>& proposals, const Box& prev_box, const CropSpec& spec,
                         const SelectConfig& cfg) {
  if (proposals.empty()) throw std::invalid_argument("select_proposal: no proposals");
  std::size_t best = 0;
  double best_score = penalized_score(proposals[0], prev_box, spec, cfg);
  for (std::size_t i = 1; i < proposals.size(); ++i) {
    const double s = penalized_score(proposals[i], prev_box, spec, cfg);
    const Proposal& a = proposals[i];
    const Proposal& b = proposals[best];
    const auto key_a = std::make_tuple(-s, -a.score, a.box.center().y, a.box.center().x);
    const auto key_b = std::make_tuple(-best_score, -b.score, b.box.center().y, b.box.center().x);
    if (key_a < key_b) {
      best = i;
      best_score = s;
    }
  }
  return proposals[best];
}

Tracker::Tracker(const TrackerModel& model, const CropGeometry& geom, const SelectConfig& select)
    : model_(&model), geom_(geom), select_(select) {
  select_.validate();
  if (geom.target_size != model.config.target_size || geom.search_size != model.config.search_size) {
    throw std::invalid_argument("tracker: crop geometry does not match the model input sizes");
  }
}

Tensor<float> Tracker::template_features(const Image& target_crop) const {
  const Encoding<float> enc =
      encode(model_->params, model_->config, image_to_tensor<float>(target_crop), Branch::target);
  return enc.features();
}

Tensor<float> Tracker::target_features(const Image& frame, const CropSpec& spec) const {
  return template_features(crop_and_resize(frame, spec));
}

void Tracker::init(const Image& frame, const Box& box) {
  template_ = target_features(frame, make_target_crop_spec(box, geom_.target_size));
  state_ = box;
}

void Tracker::init_with_template(const Image& target_crop, const Box& box) {
  template_ = template_features(target_crop);
  state_ = box;
}

TrackerOutput Tracker::infer(const Tensor<float>& target_features, const Image& frame,
                             const CropSpec& search_spec) const {
  const Image crop = crop_and_resize(frame, search_spec);
  const Encoding<float> enc = encode(model_->params, model_->config, image_to_tensor<float>(crop), Branch::search);
  return TrackerOutput{tracker_head(model_->params, cross_convolve(target_features, enc.features()))};
}

Proposal Tracker::predict(const Tensor<float>& target_features, const Image& frame, const CropSpec& search_spec,
                          const Box& prev_box) const {
  const TrackerOutput out = infer(target_features, frame, search_spec);
  const std::vector<Proposal> proposals = proposals_from_output(out, search_spec, geom_.stride, select_);
  if (proposals.empty()) return Proposal{prev_box, 0.0, Cell{}};
  return select_proposal(proposals, prev_box, search_spec, select_);
}

Proposal Tracker::step(const Image& frame) {
  if (template_.empty()) throw std::logic_error("tracker: step before init");
  const CropSpec spec = make_search_crop_spec(state_, geom_.search_size, geom_.search_ratio);
  Proposal p = predict(template_, frame, spec, state_);
  // Keep a usable state if the decoded box collapsed.
  if (p.box.area() <= 0.0) p.box = Box::from_center(p.box.center(), state_.width(), state_.height());
  state_ = p.box;
  return p;
}

std::vector<TrackedFrame> track_sequence(const Sequence& seq, const Box& init_box, const TrackerModel& model,
                                         const CropGeometry& geom, const SelectConfig& select,
                                         const Image* template_override) {
  Tracker tracker(model, geom, select);
  if (seq.frames.empty()) return {};
  if (template_override) {
    tracker.init_with_template(*template_override, init_box);
  } else {
    tracker.init(seq.frames.front(), init_box);
  }
  std::vector<TrackedFrame> out;
  out.reserve(seq.frames.size());
  for (const Image& frame : seq.frames) {
    const Proposal p = tracker.step(frame);
    out.push_back({p.box, p.score});
  }
  return out;
}

void write_tracking_results(const std::filesystem::path& path, const std::string& sequence_id,
                            const std::vector<TrackedFrame>& frames) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const nlohmann::json rec = {{"sequence_id", sequence_id}, {"frame", i},
                                {"x_min", frames[i].box.x_min}, {"y_min", frames[i].box.y_min},
                                {"x_max", frames[i].box.x_max}, {"y_max", frames[i].box.y_max},
                                {"score", frames[i].score}};
    out << rec.dump() << "\n";
  }
}

}  // namespace siamtrack
