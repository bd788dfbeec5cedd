#include "siamtrack/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace siamtrack {

namespace {

struct FrameRef {
  const Sequence* seq;
  int t;
};

Tensor<float> features(const TrackerModel& model, const Image& frame, const CropSpec& spec, Branch branch) {
  return encode(model.params, model.config, image_to_tensor<float>(crop_and_resize(frame, spec)), branch).features();
}

Box locate(const TrackerModel& model, const Tensor<float>& target, const Tensor<float>& search,
           const CropSpec& search_spec, const Box& prev, const CropGeometry& geom, const SelectConfig& select) {
  const TrackerOutput out{tracker_head(model.params, cross_convolve(target, search))};
  const std::vector<Proposal> proposals = proposals_from_output(out, search_spec, geom.stride, select);
  if (proposals.empty()) return prev;
  return select_proposal(proposals, prev, search_spec, select).box;
}

std::vector<FrameRef> adjacent_pairs(const std::vector<Sequence>& dataset, int stride) {
  std::vector<FrameRef> pairs;
  for (const Sequence& seq : dataset) {
    for (int t = 0; t + 1 < seq.size(); t += stride) {
      if (seq.annotations[t].visible && seq.annotations[t + 1].visible) pairs.push_back({&seq, t});
    }
  }
  if (pairs.empty()) throw std::invalid_argument("sweep: dataset has no consecutive annotated frame pairs");
  return pairs;
}

void check_model(const TrackerModel& model, const CropGeometry& geom) {
  if (geom.target_size != model.config.target_size || geom.search_size != model.config.search_size) {
    throw std::invalid_argument("sweep: crop geometry does not match the model input sizes");
  }
}

// Per-pair IoU rows -> normalized per-cell means. Rows whose baseline entry
// is 0 are dropped.
SweepGrid reduce_grid(const std::string& kind, const std::vector<double>& axis,
                      const std::vector<std::vector<double>>& ious, std::size_t baseline_cell) {
  SweepGrid grid;
  grid.kind = kind;
  grid.axis_x = axis;
  grid.axis_y = axis;
  const std::size_t cells = axis.size() * axis.size();
  std::vector<double> sum(cells, 0.0);
  grid.count.assign(cells, 0);
  grid.total_pairs = static_cast<long>(ious.size());
  for (const auto& row : ious) {
    const double base = row[baseline_cell];
    if (!(base > 0.0)) {
      ++grid.dropped_pairs;
      continue;
    }
    for (std::size_t c = 0; c < cells; ++c) {
      sum[c] += row[c] / base;
      ++grid.count[c];
    }
  }
  grid.mean.resize(cells);
  for (std::size_t c = 0; c < cells; ++c) grid.mean[c] = grid.count[c] > 0 ? sum[c] / grid.count[c] : 0.0;
  return grid;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void set_pixel(Image& img, int x, int y, float r, float g, float b) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  img.at(x, y, 0) = r;
  img.at(x, y, 1) = g;
  img.at(x, y, 2) = b;
}

void draw_line(Image& img, double x0, double y0, double x1, double y1, float r, float g, float b) {
  const int n = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int i = 0; i <= n; ++i) {
    const double a = static_cast<double>(i) / n;
    const int x = static_cast<int>(std::lround(x0 + a * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + a * (y1 - y0)));
    for (int dy = 0; dy <= 1; ++dy) {
      for (int dx = 0; dx <= 1; ++dx) set_pixel(img, x + dx, y + dy, r, g, b);
    }
  }
}

// Line plot of y over x on a white canvas, y axis spanning [0, y_max], with
// a dashed reference line at y = 1.
Image render_curve(const std::vector<double>& xs, const std::vector<double>& ys) {
  constexpr int kW = 480, kH = 320, kMargin = 30;
  Image img(kW, kH, 3, 1.0f);
  double y_max = 1.2;
  for (double y : ys) y_max = std::max(y_max, y * 1.05);
  const double x_lo = xs.front();
  const double x_hi = xs.size() > 1 ? xs.back() : xs.front() + 1.0;
  auto px = [&](double x) { return kMargin + (x - x_lo) / (x_hi - x_lo) * (kW - 2 * kMargin); };
  auto py = [&](double y) { return kH - kMargin - y / y_max * (kH - 2 * kMargin); };
  draw_line(img, kMargin, kH - kMargin, kW - kMargin, kH - kMargin, 0, 0, 0);
  draw_line(img, kMargin, kMargin, kMargin, kH - kMargin, 0, 0, 0);
  for (double x = kMargin; x < kW - kMargin; x += 12) draw_line(img, x, py(1.0), x + 5, py(1.0), 0.6f, 0.6f, 0.6f);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    draw_line(img, px(xs[i - 1]), py(ys[i - 1]), px(xs[i]), py(ys[i]), 0.8f, 0.1f, 0.1f);
  }
  return img;
}

}  // namespace

std::vector<double> SweepConfig::axis() const {
  validate();
  const int n = cells();
  const int half = n / 2;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = (i - half) * step;
  return out;
}

int SweepConfig::cells() const { return 2 * static_cast<int>(std::lround(extent / step)) + 1; }

void SweepConfig::validate() const {
  if (!(step > 0.0) || !(extent >= 0.0)) throw std::invalid_argument("sweep: step must be > 0 and extent >= 0");
  const double n = extent / step;
  if (std::abs(n - std::round(n)) > 1e-9) throw std::invalid_argument("sweep: extent must be a multiple of step");
  if (max_dt < 1) throw std::invalid_argument("sweep: max_dt must be >= 1");
  if (pair_stride < 1) throw std::invalid_argument("sweep: pair_stride must be >= 1");
}

SweepGrid search_sweep(const TrackerModel& model, const std::vector<Sequence>& dataset, const SweepConfig& cfg,
                       const CropGeometry& geom, const SelectConfig& select) {
  check_model(model, geom);
  const std::vector<double> axis = cfg.axis();
  const int n = static_cast<int>(axis.size());
  const std::vector<FrameRef> pairs = adjacent_pairs(dataset, cfg.pair_stride);
  const int items = static_cast<int>(pairs.size()) * n * n;
  std::vector<std::vector<double>> ious(pairs.size(), std::vector<double>(static_cast<std::size_t>(n) * n));
  std::vector<Tensor<float>> targets(pairs.size());
#pragma omp parallel for schedule(static)
  for (int p = 0; p < static_cast<int>(pairs.size()); ++p) {
    const Sequence& seq = *pairs[p].seq;
    const Box& box = seq.annotations[pairs[p].t].box;
    targets[p] = features(model, seq.frames[pairs[p].t], make_target_crop_spec(box, geom.target_size), Branch::target);
  }
#pragma omp parallel for schedule(dynamic, 8)
  for (int item = 0; item < items; ++item) {
    const int p = item / (n * n);
    const int cell = item % (n * n);
    const Sequence& seq = *pairs[p].seq;
    const int t = pairs[p].t;
    const Box& box = seq.annotations[t].box;
    const double sf = box.size_factor();
    const double dx = axis[cell % n] * sf;
    const double dy = axis[cell / n] * sf;
    const CropSpec spec = make_search_crop_spec(box, geom.search_size, geom.search_ratio).shifted(dx, dy);
    const Tensor<float> search = features(model, seq.frames[t + 1], spec, Branch::search);
    const Box pred = locate(model, targets[p], search, spec, box.translated(dx, dy), geom, select);
    ious[p][cell] = iou(pred, seq.annotations[t + 1].box);
  }
  return reduce_grid("search", axis, ious, static_cast<std::size_t>(n / 2) * n + n / 2);
}

SweepGrid target_sweep(const TrackerModel& model, const std::vector<Sequence>& dataset, const SweepConfig& cfg,
                       const CropGeometry& geom, const SelectConfig& select) {
  check_model(model, geom);
  const std::vector<double> axis = cfg.axis();
  const int n = static_cast<int>(axis.size());
  const std::vector<FrameRef> pairs = adjacent_pairs(dataset, cfg.pair_stride);
  const int items = static_cast<int>(pairs.size()) * n * n;
  std::vector<std::vector<double>> ious(pairs.size(), std::vector<double>(static_cast<std::size_t>(n) * n));
  std::vector<Tensor<float>> searches(pairs.size());
#pragma omp parallel for schedule(static)
  for (int p = 0; p < static_cast<int>(pairs.size()); ++p) {
    const Sequence& seq = *pairs[p].seq;
    const Box& box = seq.annotations[pairs[p].t].box;
    searches[p] = features(model, seq.frames[pairs[p].t + 1],
                           make_search_crop_spec(box, geom.search_size, geom.search_ratio), Branch::search);
  }
#pragma omp parallel for schedule(dynamic, 8)
  for (int item = 0; item < items; ++item) {
    const int p = item / (n * n);
    const int cell = item % (n * n);
    const Sequence& seq = *pairs[p].seq;
    const int t = pairs[p].t;
    const Box& box = seq.annotations[t].box;
    const double sf = box.size_factor();
    const CropSpec target_spec =
        make_target_crop_spec(box, geom.target_size).shifted(axis[cell % n] * sf, axis[cell / n] * sf);
    const Tensor<float> target = features(model, seq.frames[t], target_spec, Branch::target);
    const CropSpec search_spec = make_search_crop_spec(box, geom.search_size, geom.search_ratio);
    const Box pred = locate(model, target, searches[p], search_spec, box, geom, select);
    ious[p][cell] = iou(pred, seq.annotations[t + 1].box);
  }
  return reduce_grid("target", axis, ious, static_cast<std::size_t>(n / 2) * n + n / 2);
}

SweepCurve staleness_sweep(const TrackerModel& model, const std::vector<Sequence>& dataset, const SweepConfig& cfg,
                           const CropGeometry& geom, const SelectConfig& select) {
  check_model(model, geom);
  cfg.validate();
  const int depth = cfg.max_dt;
  std::vector<FrameRef> anchors;
  for (const Sequence& seq : dataset) {
    for (int t = depth; t < seq.size(); t += cfg.pair_stride) {
      if (seq.annotations[t].visible && seq.annotations[t - 1].visible) anchors.push_back({&seq, t});
    }
  }
  SweepCurve curve;
  for (int dt = 1; dt <= depth; ++dt) curve.dt.push_back(dt);
  if (anchors.empty()) throw std::invalid_argument("staleness sweep: no sequence is longer than max_dt");

  // NaN marks (anchor, dt) samples whose target frame is not visible.
  std::vector<std::vector<double>> ious(anchors.size(), std::vector<double>(depth, 0.0));
  std::vector<Tensor<float>> searches(anchors.size());
#pragma omp parallel for schedule(static)
  for (int a = 0; a < static_cast<int>(anchors.size()); ++a) {
    const Sequence& seq = *anchors[a].seq;
    const int t = anchors[a].t;
    searches[a] = features(model, seq.frames[t],
                           make_search_crop_spec(seq.annotations[t - 1].box, geom.search_size, geom.search_ratio),
                           Branch::search);
  }
  const int items = static_cast<int>(anchors.size()) * depth;
#pragma omp parallel for schedule(dynamic, 8)
  for (int item = 0; item < items; ++item) {
    const int a = item / depth;
    const int dt = item % depth + 1;
    const Sequence& seq = *anchors[a].seq;
    const int t = anchors[a].t;
    const Annotation& past = seq.annotations[t - dt];
    if (!past.visible) {
      ious[a][dt - 1] = std::nan("");
      continue;
    }
    const Tensor<float> target =
        features(model, seq.frames[t - dt], make_target_crop_spec(past.box, geom.target_size), Branch::target);
    const Box& prev = seq.annotations[t - 1].box;
    const CropSpec spec = make_search_crop_spec(prev, geom.search_size, geom.search_ratio);
    ious[a][dt - 1] = iou(locate(model, target, searches[a], spec, prev, geom, select), seq.annotations[t].box);
  }

  std::vector<double> sum(depth, 0.0);
  curve.count.assign(depth, 0);
  curve.total_anchors = static_cast<long>(anchors.size());
  for (const auto& row : ious) {
    const double base = row[0];
    if (!(base > 0.0)) {
      ++curve.dropped_anchors;
      continue;
    }
    for (int k = 0; k < depth; ++k) {
      if (std::isnan(row[k])) continue;
      sum[k] += row[k] / base;
      ++curve.count[k];
    }
  }
  curve.mean.resize(depth);
  for (int k = 0; k < depth; ++k) curve.mean[k] = curve.count[k] > 0 ? sum[k] / curve.count[k] : 0.0;
  return curve;
}

GridSummary summarize_grid(const SweepGrid& grid) {
  const std::size_t nx = grid.axis_x.size();
  const std::size_t ny = grid.axis_y.size();
  if (nx == 0 || ny == 0 || grid.mean.size() != nx * ny) throw std::invalid_argument("summarize: empty sweep grid");
  const double step = nx > 1 ? std::abs(grid.axis_x[1] - grid.axis_x[0]) : 1.0;
  std::map<long, std::pair<double, long>> bins;
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const std::size_t c = iy * nx + ix;
      if (!grid.count.empty() && grid.count[c] == 0) continue;
      const double r = std::hypot(grid.axis_x[ix], grid.axis_y[iy]) / step;
      auto& bin = bins[std::lround(r)];
      bin.first += grid.mean[c];
      ++bin.second;
    }
  }
  if (bins.empty()) throw std::invalid_argument("summarize: sweep grid has no samples");
  GridSummary s;
  for (const auto& [k, b] : bins) s.radial.emplace_back(k * step, b.first / b.second);
  s.center = s.radial.front().second;
  // Outer bins: radius at least 75% of the axis half-width.
  const double half = std::max(std::abs(grid.axis_x.front()), std::abs(grid.axis_x.back()));
  double plateau_sum = 0.0;
  int plateau_n = 0;
  for (const auto& [r, v] : s.radial) {
    if (r >= 0.75 * half - 1e-9 && r <= half + 1e-9) {
      plateau_sum += v;
      ++plateau_n;
    }
  }
  s.plateau = plateau_n > 0 ? plateau_sum / plateau_n : s.radial.back().second;
  const double ref = std::min(s.center, s.plateau);
  s.dip_radius = s.radial.front().first;
  double low = s.center;
  for (const auto& [r, v] : s.radial) {
    if (r > half + 1e-9) break;
    if (v < low) {
      low = v;
      s.dip_radius = r;
    }
  }
  s.dip = std::max(0.0, ref - low);
  return s;
}

CurveSummary summarize_curve(const SweepCurve& curve) {
  if (curve.mean.empty()) throw std::invalid_argument("summarize: empty sweep curve");
  CurveSummary s;
  s.first = curve.mean.front();
  s.last = curve.mean.back();
  const std::size_t n = curve.mean.size();
  const std::size_t tail = std::max<std::size_t>(1, n / 4);
  double sum = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) sum += curve.mean[i];
  s.asymptote = sum / static_cast<double>(tail);
  return s;
}

void write_grid_csv(const std::filesystem::path& path, const SweepGrid& grid) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "axis_x,axis_y,mean_norm_iou,n_samples\n";
  for (std::size_t iy = 0; iy < grid.axis_y.size(); ++iy) {
    for (std::size_t ix = 0; ix < grid.axis_x.size(); ++ix) {
      const std::size_t c = iy * grid.axis_x.size() + ix;
      out << num(grid.axis_x[ix]) << "," << num(grid.axis_y[iy]) << "," << num(grid.mean[c]) << ","
          << (grid.count.empty() ? 0 : grid.count[c]) << "\n";
    }
  }
}

void write_curve_csv(const std::filesystem::path& path, const SweepCurve& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "dt,mean_norm_iou,n_samples\n";
  for (std::size_t i = 0; i < curve.dt.size(); ++i) {
    out << curve.dt[i] << "," << num(curve.mean[i]) << "," << curve.count[i] << "\n";
  }
}

SweepGrid read_grid_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "axis_x,axis_y,mean_norm_iou,n_samples") {
    throw std::runtime_error(path.string() + ": not a sweep grid CSV");
  }
  std::vector<double> xs, ys, vals;
  std::vector<long> counts;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c, d;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',') || !std::getline(ss, d)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    }
    xs.push_back(std::stod(a));
    ys.push_back(std::stod(b));
    vals.push_back(std::stod(c));
    counts.push_back(std::stol(d));
  }
  SweepGrid g;
  for (double x : xs) {
    if (std::find(g.axis_x.begin(), g.axis_x.end(), x) == g.axis_x.end()) g.axis_x.push_back(x);
  }
  for (double y : ys) {
    if (std::find(g.axis_y.begin(), g.axis_y.end(), y) == g.axis_y.end()) g.axis_y.push_back(y);
  }
  if (g.axis_x.size() * g.axis_y.size() != vals.size()) {
    throw std::runtime_error(path.string() + ": rows do not form a full grid");
  }
  g.mean = std::move(vals);
  g.count = std::move(counts);
  return g;
}

void write_grid_report(const std::filesystem::path& dir, const std::string& stem, const SweepGrid& grid) {
  std::filesystem::create_directories(dir);
  write_grid_csv(dir / (stem + ".csv"), grid);
  write_heatmap_png(dir / (stem + ".png"), grid.mean, static_cast<int>(grid.axis_x.size()),
                    static_cast<int>(grid.axis_y.size()), 0.0, 2.0, 16);
  const GridSummary s = summarize_grid(grid);
  std::vector<double> rs, vs;
  for (const auto& [r, v] : s.radial) {
    rs.push_back(r);
    vs.push_back(v);
  }
  write_png(dir / (stem + "_radial.png"), render_curve(rs, vs));
  nlohmann::ordered_json j = {{"kind", grid.kind},           {"center", s.center},
                              {"plateau", s.plateau},        {"dip", s.dip},
                              {"dip_radius", s.dip_radius},  {"plateau_minus_center", s.plateau - s.center},
                              {"total_pairs", grid.total_pairs}, {"dropped_pairs", grid.dropped_pairs}};
  nlohmann::ordered_json radial = nlohmann::ordered_json::array();
  for (const auto& [r, v] : s.radial) radial.push_back({r, v});
  j["radial_profile"] = radial;
  std::ofstream(dir / (stem + "_summary.json"), std::ios::trunc) << j.dump(2) << "\n";
}

void write_curve_report(const std::filesystem::path& dir, const std::string& stem, const SweepCurve& curve) {
  std::filesystem::create_directories(dir);
  write_curve_csv(dir / (stem + ".csv"), curve);
  std::vector<double> xs(curve.dt.begin(), curve.dt.end());
  write_png(dir / (stem + ".png"), render_curve(xs, curve.mean));
  const CurveSummary s = summarize_curve(curve);
  nlohmann::ordered_json j = {{"kind", "staleness"},     {"first", s.first},
                              {"last", s.last},          {"asymptote", s.asymptote},
                              {"drop", 1.0 - s.asymptote}, {"total_anchors", curve.total_anchors},
                              {"dropped_anchors", curve.dropped_anchors}};
  std::ofstream(dir / (stem + "_summary.json"), std::ios::trunc) << j.dump(2) << "\n";
}

}  // namespace siamtrack
