#include "siamtrack/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace siamtrack {

namespace {

using nlohmann::json;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Rotation about the gray axis of RGB space.
std::array<float, 3> rotate_hue(const std::array<float, 3>& rgb, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double k = (1.0 - c) / 3.0;
  const double q = s / std::sqrt(3.0);
  const double m00 = c + k, m01 = k - q, m02 = k + q;
  const double m10 = k + q, m11 = c + k, m12 = k - q;
  const double m20 = k - q, m21 = k + q, m22 = c + k;
  return {static_cast<float>(m00 * rgb[0] + m01 * rgb[1] + m02 * rgb[2]),
          static_cast<float>(m10 * rgb[0] + m11 * rgb[1] + m12 * rgb[2]),
          static_cast<float>(m20 * rgb[0] + m21 * rgb[1] + m22 * rgb[2])};
}

std::array<float, 3> random_color(Rng& rng, double lo, double hi) {
  return {static_cast<float>(uniform(rng, lo, hi)), static_cast<float>(uniform(rng, lo, hi)),
          static_cast<float>(uniform(rng, lo, hi))};
}

double color_distance(const std::array<float, 3>& a, const std::array<float, 3>& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

Texture random_texture(Rng& rng) {
  Texture t;
  t.base = random_color(rng, 0.05, 0.95);
  do {
    t.stripe = random_color(rng, 0.05, 0.95);
  } while (color_distance(t.base, t.stripe) < 0.35);
  t.frequency = uniform(rng, 1.0, 3.0);
  t.phase = uniform(rng, 0.0, kTwoPi);
  t.angle = uniform(rng, 0.0, std::numbers::pi);
  return t;
}

// A texture clearly different from `other`.
Texture distinct_texture(Rng& rng, const Texture& other) {
  Texture t;
  do {
    t = random_texture(rng);
  } while (color_distance(t.base, other.base) < 0.45 || color_distance(t.stripe, other.stripe) < 0.3);
  return t;
}

struct Margins {
  double x_lo, x_hi, y_lo, y_hi;
};

Margins margins_for(const ObjectSpec& o, int width, int height) {
  const double mx = 0.5 * o.width + 4.0;
  const double my = 0.5 * o.height + 4.0;
  return {mx, std::max(mx, width - mx), my, std::max(my, height - my)};
}

void reflect(double& p, double& v, double lo, double hi) {
  if (p < lo) {
    p = 2.0 * lo - p;
    v = -v;
  } else if (p > hi) {
    p = 2.0 * hi - p;
    v = -v;
  }
  p = std::clamp(p, lo, hi);
}

// Per-frame centers, reflecting off the margins.
std::vector<Point> trajectory(const ObjectSpec& o, int frames, int width, int height) {
  const Margins m = margins_for(o, width, height);
  std::vector<Point> path(frames);
  Point p = o.center;
  Point v = o.velocity;
  for (int t = 0; t < frames; ++t) {
    path[t] = p;
    p.x += v.x;
    p.y += v.y;
    reflect(p.x, v.x, m.x_lo, m.x_hi);
    reflect(p.y, v.y, m.y_lo, m.y_hi);
  }
  return path;
}

// Start state that reaches `at` after `steps` frames with final velocity `v`.
ObjectSpec rewind(ObjectSpec o, Point at, Point v, int steps, int width, int height) {
  const Margins m = margins_for(o, width, height);
  Point p = at;
  Point back{-v.x, -v.y};
  for (int i = 0; i < steps; ++i) {
    p.x += back.x;
    p.y += back.y;
    reflect(p.x, back.x, m.x_lo, m.x_hi);
    reflect(p.y, back.y, m.y_lo, m.y_hi);
  }
  o.center = p;
  o.velocity = {-back.x, -back.y};
  return o;
}

// Coverage of the shape at local coordinates (u, v) in [-0.5, 0.5]^2.
bool inside(ShapeClass shape, double u, double v) {
  switch (shape) {
    case ShapeClass::ellipse:
      return u * u + v * v <= 0.25;
    case ShapeClass::rectangle:
      return std::abs(u) <= 0.5 && std::abs(v) <= 0.5;
    case ShapeClass::triangle:
      // apex at top center, base along the bottom edge
      return v <= 0.5 && v >= -0.5 && std::abs(u) <= 0.5 * (v + 0.5);
  }
  return false;
}

struct ObjectState {
  Point center;
  double width;
  double height;
  Texture texture;
};

ObjectState object_state(const ObjectSpec& o, const std::vector<Point>& path, int t, std::uint64_t seed) {
  ObjectState s;
  s.center = path[t];
  if (o.jitter_std > 0.0) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::normal_distribution<double> jitter(0.0, o.jitter_std);
    s.center.x += jitter(rng);
    s.center.y += jitter(rng);
  }
  const double scale = std::pow(o.scale_drift, t);
  s.width = o.width * scale;
  s.height = o.height * scale;
  s.texture = o.texture;
  s.texture.phase += o.phase_drift * t;
  if (o.hue_drift != 0.0) {
    s.texture.base = rotate_hue(o.texture.base, o.hue_drift * t);
    s.texture.stripe = rotate_hue(o.texture.stripe, o.hue_drift * t);
  }
  return s;
}

// Draws with 2x2 supersampled coverage. `target_cov` tracks how much of the
// target survives later draws; when `is_target` the buffer is seeded.
void draw_object(Image& img, const ObjectSpec& o, const ObjectState& s, std::vector<float>& target_cov,
                 bool is_target) {
  const Box b = Box::from_center(s.center, s.width, s.height);
  const int x0 = std::max(0, static_cast<int>(std::floor(b.x_min)));
  const int y0 = std::max(0, static_cast<int>(std::floor(b.y_min)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(b.x_max)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(b.y_max)));
  const double ca = std::cos(s.texture.angle);
  const double sa = std::sin(s.texture.angle);
  static constexpr double kSub[2] = {0.25, 0.75};
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      int hits = 0;
      for (double sy : kSub) {
        for (double sx : kSub) {
          const double u = (x + sx - s.center.x) / s.width;
          const double v = (y + sy - s.center.y) / s.height;
          hits += inside(o.shape, u, v) ? 1 : 0;
        }
      }
      if (hits == 0) continue;
      const float alpha = hits / 4.0f;
      const double u = (x + 0.5 - s.center.x) / s.width;
      const double v = (y + 0.5 - s.center.y) / s.height;
      const double proj = u * ca + v * sa;
      const float mix = static_cast<float>(0.5 + 0.5 * std::sin(kTwoPi * s.texture.frequency * proj + s.texture.phase));
      for (int c = 0; c < 3; ++c) {
        const float color = s.texture.base[c] * (1.0f - mix) + s.texture.stripe[c] * mix;
        float& px = img.at(x, y, c);
        px = px * (1.0f - alpha) + color * alpha;
      }
      float& cov = target_cov[static_cast<std::size_t>(y) * img.width + x];
      cov = is_target ? alpha : cov * (1.0f - alpha);
    }
  }
}

void draw_background(Image& img, const BackgroundSpec& bg, std::uint64_t seed) {
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double s = 0.5 + 0.25 * std::sin(bg.frequency_x * x + bg.phase) +
                       0.25 * std::sin(bg.frequency_y * y + 0.7 * bg.phase);
      const std::uint64_t h = mix_seed(seed, static_cast<std::uint64_t>(y) * 65536u + static_cast<std::uint64_t>(x));
      const double noise = bg.noise * ((h >> 11) * (1.0 / 9007199254740992.0) - 0.5) * 2.0;
      for (int c = 0; c < 3; ++c) {
        img.at(x, y, c) = static_cast<float>(std::clamp(
            bg.color_a[c] * (1.0 - s) + bg.color_b[c] * s + noise, 0.0, 1.0));
      }
    }
  }
}

const ObjectSpec& target_of(const SceneScript& script) {
  for (const auto& o : script.objects) {
    if (o.is_target) return o;
  }
  throw std::invalid_argument("scene has no target");
}

ObjectSpec random_target(Rng& rng, int width, int height, double speed_lo, double speed_hi) {
  ObjectSpec t;
  t.is_target = true;
  t.shape = static_cast<ShapeClass>(uniform_int(rng, 0, 2));
  const double size = uniform(rng, 18.0, 30.0);
  const double aspect = uniform(rng, 0.75, 1.33);
  t.width = size * std::sqrt(aspect);
  t.height = size / std::sqrt(aspect);
  t.texture = random_texture(rng);
  const Margins m = margins_for(t, width, height);
  t.center = {uniform(rng, m.x_lo, m.x_hi), uniform(rng, m.y_lo, m.y_hi)};
  const double heading = uniform(rng, 0.0, kTwoPi);
  const double speed = uniform(rng, speed_lo, speed_hi);
  t.velocity = {speed * std::cos(heading), speed * std::sin(heading)};
  t.jitter_std = 0.3;
  t.scale_drift = uniform(rng, 0.997, 1.003);
  return t;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string frame_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d.png", index);
  return buf;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void SceneScript::validate() const {
  if (num_frames <= 0 || width <= 0 || height <= 0) throw std::invalid_argument("scene: empty frame geometry");
  const auto targets = std::count_if(objects.begin(), objects.end(), [](const ObjectSpec& o) { return o.is_target; });
  if (targets != 1) throw std::invalid_argument("scene must contain exactly one target");
  for (const auto& o : objects) {
    if (!(o.width > 0.0 && o.height > 0.0)) throw std::invalid_argument("scene: object with non-positive size");
  }
  const ObjectSpec& t = target_of(*this);
  const Box b = Box::from_center(t.center, t.width, t.height);
  if (b.x_max <= 0.0 || b.y_max <= 0.0 || b.x_min >= width || b.y_min >= height) {
    throw std::invalid_argument("scene: target starts fully off-frame");
  }
}

SceneKind scene_kind_from_string(const std::string& name) {
  if (name == "easy") return SceneKind::easy;
  if (name == "hard") return SceneKind::hard;
  if (name == "drift") return SceneKind::drift;
  throw std::invalid_argument("unknown scene kind '" + name + "'");
}

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::easy:
      return "easy";
    case SceneKind::hard:
      return "hard";
    case SceneKind::drift:
      return "drift";
  }
  return "easy";
}

SceneScript make_scene_script(std::uint64_t seed, SceneKind kind, int num_frames, int width, int height) {
  Rng rng(mix_seed(seed, 0x5ce7e));
  SceneScript s;
  s.seed = seed;
  s.num_frames = num_frames;
  s.width = width;
  s.height = height;
  s.split = to_string(kind);
  s.background.color_a = random_color(rng, 0.25, 0.75);
  s.background.color_b = random_color(rng, 0.25, 0.75);
  s.background.frequency_x = uniform(rng, 0.01, 0.06);
  s.background.frequency_y = uniform(rng, 0.01, 0.06);
  s.background.phase = uniform(rng, 0.0, kTwoPi);
  s.background.noise = 0.04;

  ObjectSpec target = random_target(rng, width, height, 0.5, 2.0);
  if (kind == SceneKind::drift) {
    target.phase_drift = uniform(rng, 0.04, 0.08);
    target.hue_drift = uniform(rng, 0.015, 0.03);
    target.scale_drift = uniform(rng, 0.99, 1.01);
  }
  if (kind != SceneKind::hard) {
    s.objects.push_back(target);
    return s;
  }

  // Hard scenes: two same-shape distractors timed to cross the target path.
  const std::vector<Point> path = trajectory(target, num_frames, width, height);
  std::vector<ObjectSpec> distractors;
  for (int d = 0; d < 2; ++d) {
    ObjectSpec o = target;
    o.is_target = false;
    o.similarity_class = 1;
    o.scale_drift = 1.0;
    o.width *= uniform(rng, 0.9, 1.1);
    o.height *= uniform(rng, 0.9, 1.1);
    o.texture = distinct_texture(rng, target.texture);
    const int crossing = uniform_int(rng, num_frames / 4, (3 * num_frames) / 4);
    const double heading = uniform(rng, 0.0, kTwoPi);
    const double speed = uniform(rng, 1.0, 2.5);
    const Point v{speed * std::cos(heading), speed * std::sin(heading)};
    const Point at{path[crossing].x + uniform(rng, -4.0, 4.0), path[crossing].y + uniform(rng, -4.0, 4.0)};
    distractors.push_back(rewind(o, at, v, crossing, width, height));
  }
  // One distractor passes beneath the target, the other above it.
  s.objects.push_back(distractors[0]);
  s.objects.push_back(target);
  s.objects.push_back(distractors[1]);

  ObjectSpec bar;
  bar.shape = ShapeClass::rectangle;
  bar.texture.base = random_color(rng, 0.2, 0.8);
  bar.texture.stripe = bar.texture.base;
  bar.width = uniform(rng, 6.0, 10.0);
  bar.height = 0.6 * height;
  const int crossing = uniform_int(rng, num_frames / 4, (3 * num_frames) / 4);
  const double speed = uniform(rng, 2.5, 4.0) * (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
  bar.center = {path[crossing].x - speed * crossing, path[crossing].y};
  bar.velocity = {speed, 0.0};
  s.occluders.push_back(bar);
  return s;
}

Sequence render_sequence(const SceneScript& script) {
  script.validate();
  const int n_obj = static_cast<int>(script.objects.size());
  std::vector<std::vector<Point>> paths;
  for (const auto& o : script.objects) paths.push_back(trajectory(o, script.num_frames, script.width, script.height));
  // Occluders move in straight lines and may leave the frame.
  auto occluder_center = [&](const ObjectSpec& o, int t) {
    return Point{o.center.x + o.velocity.x * t, o.center.y + o.velocity.y * t};
  };

  Sequence seq;
  seq.split = script.split;
  seq.frames.resize(script.num_frames);
  seq.annotations.resize(script.num_frames);
  const Box frame_box{0.0, 0.0, static_cast<double>(script.width), static_cast<double>(script.height)};
  std::vector<float> target_cov(static_cast<std::size_t>(script.width) * script.height);

  for (int t = 0; t < script.num_frames; ++t) {
    Image img(script.width, script.height, 3);
    draw_background(img, script.background, script.seed);
    std::fill(target_cov.begin(), target_cov.end(), 0.0f);
    Box target_box;
    for (int i = 0; i < n_obj; ++i) {
      const ObjectSpec& o = script.objects[i];
      const ObjectState st = object_state(o, paths[i], t, mix_seed(script.seed, 100 + i));
      draw_object(img, o, st, target_cov, o.is_target);
      if (o.is_target) target_box = Box::from_center(st.center, st.width, st.height);
    }
    double full_cov = 0.0;
    for (float c : target_cov) full_cov += c;
    for (const auto& o : script.occluders) {
      ObjectState st{occluder_center(o, t), o.width, o.height, o.texture};
      draw_object(img, o, st, target_cov, false);
    }
    double left_cov = 0.0;
    for (float c : target_cov) left_cov += c;
    quantize_to_8bit(img);

    const Box clipped = target_box.clipped(frame_box);
    const double area_fraction = target_box.area() > 0.0 ? clipped.area() / target_box.area() : 0.0;
    const double visible_fraction = full_cov > 0.0 ? left_cov / full_cov : 0.0;
    seq.frames[t] = std::move(img);
    seq.annotations[t] = {t, clipped, area_fraction > 0.0 && visible_fraction * area_fraction >= 0.25};
  }
  return seq;
}

std::vector<Sequence> generate_dataset(const DatasetSpec& spec) {
  std::vector<std::pair<SceneKind, int>> items;
  for (const auto& [kind, count] : spec.splits) {
    for (int i = 0; i < count; ++i) items.emplace_back(kind, i);
  }
  std::vector<Sequence> out(items.size());
  const int n = static_cast<int>(items.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const std::uint64_t seed = mix_seed(spec.seed, static_cast<std::uint64_t>(i));
    out[i] = render_sequence(make_scene_script(seed, items[i].first, spec.num_frames, spec.width, spec.height));
    char id[32];
    std::snprintf(id, sizeof(id), "%s_%04d", to_string(items[i].first).c_str(), items[i].second);
    out[i].id = id;
  }
  return out;
}

int sample_target_index(int start, TargetRule rule, Rng& rng) {
  if (start < 1) throw std::invalid_argument("sub-sequence start must be >= 1");
  if (rule == TargetRule::first_frame) return 0;
  return uniform_int(rng, 0, start - 1);
}

FramePair sample_pair(const Sequence& seq, const SamplerConfig& cfg, Rng& rng) {
  const int frames = seq.size();
  const int tau = cfg.subsequence_length;
  if (tau < 1) throw std::invalid_argument("sub-sequence length must be >= 1");
  if (frames < tau + 1) throw std::invalid_argument("sequence " + seq.id + " shorter than sub-sequence length + 1");
  const int start = uniform_int(rng, 1, frames - tau);
  FramePair pair;
  pair.search = uniform_int(rng, start, start + tau - 1);
  pair.target = sample_target_index(start, cfg.target_rule, rng);
  return pair;
}

CropSpec full_frame_spec(int width, int height, int out_size) {
  return {{0.5 * width, 0.5 * height}, static_cast<double>(std::max(width, height)), out_size};
}

void photometric_augment(Image& image, const AugmentConfig& cfg, Rng& rng) {
  const double contrast = 1.0 + uniform(rng, -cfg.contrast, cfg.contrast);
  const double saturation = 1.0 + uniform(rng, -cfg.saturation, cfg.saturation);
  const double hue = uniform(rng, -cfg.hue, cfg.hue);
  if (contrast == 1.0 && saturation == 1.0 && hue == 0.0) return;
  const std::vector<float> mean = image.channel_mean();
  const float gray_mean = (mean[0] + mean[1] + mean[2]) / 3.0f;
  const std::size_t pixels = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < pixels; ++i) {
    float* px = image.data.data() + i * 3;
    std::array<float, 3> rgb{px[0], px[1], px[2]};
    if (hue != 0.0) rgb = rotate_hue(rgb, hue);
    const float gray = 0.299f * rgb[0] + 0.587f * rgb[1] + 0.114f * rgb[2];
    for (int c = 0; c < 3; ++c) {
      float v = gray + static_cast<float>(saturation) * (rgb[c] - gray);
      v = gray_mean + static_cast<float>(contrast) * (v - gray_mean);
      px[c] = std::clamp(v, 0.0f, 1.0f);
    }
  }
}

TrainingExample build_training_example(const Sequence& seq, FramePair pair, const SamplerConfig& cfg,
                                       const CropGeometry& geom, Rng& rng) {
  if (pair.target < 0 || pair.search <= pair.target || pair.search >= seq.size()) {
    throw std::invalid_argument("invalid frame pair");
  }
  const Annotation& target_ann = seq.annotations[pair.target];
  const Annotation& prev_ann = seq.annotations[pair.search - 1];
  const Annotation& search_ann = seq.annotations[pair.search];
  if (!target_ann.visible || !prev_ann.visible || !search_ann.visible) {
    throw std::domain_error("target not visible in sampled frames");
  }
  const AugmentConfig& aug = cfg.augment;
  TrainingExample ex;
  ex.pair = pair;
  ex.search_box = search_ann.box;

  CropSpec target_spec = make_target_crop_spec(target_ann.box, geom.target_size);
  target_spec.side *= std::exp(uniform(rng, -aug.target_scale, aug.target_scale));
  {
    const double tx = uniform(rng, -aug.target_translation, aug.target_translation) * geom.target_size;
    const double ty = uniform(rng, -aug.target_translation, aug.target_translation) * geom.target_size;
    target_spec = target_spec.shifted(-tx / target_spec.scale(), -ty / target_spec.scale());
  }

  CropSpec search_spec = make_search_crop_spec(prev_ann.box, geom.search_size, geom.search_ratio);
  search_spec.side *= std::exp(uniform(rng, -aug.search_scale, aug.search_scale));
  {
    // Shift expressed as object displacement in search-crop pixels.
    const double tx = uniform(rng, -aug.search_translation, aug.search_translation) * geom.search_size;
    const double ty = uniform(rng, -aug.search_translation, aug.search_translation) * geom.search_size;
    search_spec = search_spec.shifted(-tx / search_spec.scale(), -ty / search_spec.scale());
  }

  const Image& target_frame = seq.frames[pair.target];
  const Image& search_frame = seq.frames[pair.search];
  ex.target_spec = target_spec;
  ex.search_spec = search_spec;
  ex.target_crop = crop_and_resize(target_frame, target_spec);
  ex.search_crop = crop_and_resize(search_frame, search_spec);
  ex.detector_spec = full_frame_spec(search_frame.width, search_frame.height, geom.search_size);
  ex.detector_frame = crop_and_resize(search_frame, ex.detector_spec);
  photometric_augment(ex.target_crop, aug, rng);
  photometric_augment(ex.search_crop, aug, rng);
  photometric_augment(ex.detector_frame, aug, rng);

  const int grid = geom.grid();
  ex.search_heat = disc_target(frame_to_grid(ex.search_box.center(), search_spec, geom.stride), grid, geom.disc_radius);
  ex.search_offsets = encode_offsets(ex.search_box, search_spec, geom.stride, grid, geom.disc_radius);
  ex.detector_heat =
      disc_target(frame_to_grid(ex.search_box.center(), ex.detector_spec, geom.stride), grid, geom.disc_radius);
  return ex;
}

TrainingExample sample_training_example(const Sequence& seq, const SamplerConfig& cfg, const CropGeometry& geom,
                                        Rng& rng) {
  constexpr int kMaxAttempts = 64;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const FramePair pair = sample_pair(seq, cfg, rng);
    try {
      return build_training_example(seq, pair, cfg, geom, rng);
    } catch (const std::domain_error&) {
      continue;
    }
  }
  throw std::runtime_error("no visible training pair found in sequence " + seq.id);
}

void write_dataset(const std::filesystem::path& root, const std::vector<Sequence>& sequences) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  json manifest = {{"format", "siamtrack-dataset"}, {"version", 1}, {"sequences", json::array()}};
  for (const Sequence& seq : sequences) {
    if (seq.id.empty()) throw std::invalid_argument("write_dataset: sequence without id");
    if (seq.frames.size() != seq.annotations.size()) {
      throw std::invalid_argument("write_dataset: frame/annotation count mismatch in " + seq.id);
    }
    const fs::path dir = root / seq.id;
    fs::create_directories(dir / "frames");
    std::string lines;
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
      write_png(dir / "frames" / frame_name(static_cast<int>(i)), seq.frames[i]);
      const Annotation& a = seq.annotations[i];
      const json rec = {{"frame", a.frame},       {"x_min", a.box.x_min}, {"y_min", a.box.y_min},
                        {"x_max", a.box.x_max}, {"y_max", a.box.y_max}, {"visible", a.visible}};
      lines += rec.dump() + "\n";
    }
    write_text_file(dir / "annotations.jsonl", lines);
    const int w = seq.frames.empty() ? 0 : seq.frames.front().width;
    const int h = seq.frames.empty() ? 0 : seq.frames.front().height;
    manifest["sequences"].push_back(
        {{"id", seq.id}, {"split", seq.split}, {"width", w}, {"height", h}, {"frames", seq.frames.size()}});
  }
  write_text_file(root / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<Annotation> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Annotation> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      Annotation a;
      a.frame = rec.at("frame").get<int>();
      a.box = {rec.at("x_min").get<double>(), rec.at("y_min").get<double>(), rec.at("x_max").get<double>(),
               rec.at("y_max").get<double>()};
      a.visible = rec.at("visible").get<bool>();
      if (!a.box.valid()) throw std::runtime_error("box with max < min");
      if (a.frame != static_cast<int>(out.size())) throw std::runtime_error("frame index out of order");
      out.push_back(a);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Sequence> read_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<Sequence> out;
  if (!fs::exists(root)) throw std::runtime_error("dataset root does not exist: " + root.string());
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::exists(manifest_path)) {
    if (fs::is_empty(root)) return out;
    throw std::runtime_error("missing manifest.json in " + root.string());
  }
  std::ifstream in(manifest_path);
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(manifest_path.string() + ": " + e.what());
  }
  for (const json& entry : manifest.at("sequences")) {
    Sequence seq;
    seq.id = entry.at("id").get<std::string>();
    seq.split = entry.value("split", std::string("unknown"));
    const fs::path dir = root / seq.id;
    seq.annotations = read_annotations(dir / "annotations.jsonl");
    const int frames = entry.at("frames").get<int>();
    if (static_cast<int>(seq.annotations.size()) != frames) {
      throw std::runtime_error((dir / "annotations.jsonl").string() + ": expected " + std::to_string(frames) +
                               " records, found " + std::to_string(seq.annotations.size()));
    }
    seq.frames.reserve(frames);
    for (int i = 0; i < frames; ++i) seq.frames.push_back(read_png(dir / "frames" / frame_name(i)));
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace siamtrack
