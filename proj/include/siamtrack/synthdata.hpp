#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "siamtrack/geometry.hpp"
#include "siamtrack/image.hpp"
#include "siamtrack/model.hpp"
#include "siamtrack/tensor.hpp"

namespace siamtrack {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

enum class ShapeClass { ellipse, rectangle, triangle };

struct Texture {
  std::array<float, 3> base{0.5f, 0.5f, 0.5f};
  std::array<float, 3> stripe{0.5f, 0.5f, 0.5f};
  double frequency = 0.0;  // stripe cycles across the object width
  double phase = 0.0;
  double angle = 0.0;  // stripe orientation, radians
};

struct ObjectSpec {
  ShapeClass shape = ShapeClass::ellipse;
  Texture texture;
  Point center;
  Point velocity;            // px / frame; reflects off the frame margins
  double width = 20.0;
  double height = 20.0;
  double scale_drift = 1.0;  // per-frame multiplicative size change
  double jitter_std = 0.0;   // px, resampled every frame, not accumulated
  double phase_drift = 0.0;  // stripe phase change per frame (appearance drift)
  double hue_drift = 0.0;    // base/stripe color rotation per frame, radians
  int similarity_class = 0;
  bool is_target = false;
};

struct BackgroundSpec {
  std::array<float, 3> color_a{0.4f, 0.4f, 0.4f};
  std::array<float, 3> color_b{0.6f, 0.6f, 0.6f};
  double frequency_x = 0.02;
  double frequency_y = 0.03;
  double phase = 0.0;
  double noise = 0.03;
};

/// Full description of one synthetic video. Rendering is a pure function of it.
struct SceneScript {
  std::uint64_t seed = 0;
  int num_frames = 50;
  int width = 160;
  int height = 160;
  std::vector<ObjectSpec> objects;    // drawn in order; exactly one target
  std::vector<ObjectSpec> occluders;  // drawn above all objects
  BackgroundSpec background;
  std::string split = "easy";

  void validate() const;
};

struct Annotation {
  int frame = 0;
  Box box;
  bool visible = true;

  bool operator==(const Annotation&) const = default;
};

struct Sequence {
  std::string id;
  std::string split;
  std::vector<Image> frames;
  std::vector<Annotation> annotations;

  int size() const { return static_cast<int>(frames.size()); }
};

/// Scene families. easy: a single salient target with smooth motion.
/// hard: same-shape distractors crossing the target path plus occluding bars.
/// drift: single target whose colors and stripes change over time.
enum class SceneKind { easy, hard, drift };

SceneKind scene_kind_from_string(const std::string& name);
std::string to_string(SceneKind kind);

SceneScript make_scene_script(std::uint64_t seed, SceneKind kind, int num_frames, int width, int height);

/// Throws std::invalid_argument if the target starts fully off-frame.
Sequence render_sequence(const SceneScript& script);

struct DatasetSpec {
  std::uint64_t seed = 0;
  int num_frames = 50;
  int width = 160;
  int height = 160;
  std::vector<std::pair<SceneKind, int>> splits{{SceneKind::easy, 10}};
};

/// Sequence i of the dataset uses seed mix_seed(spec.seed, i). Rendering is
/// parallel over sequences.
std::vector<Sequence> generate_dataset(const DatasetSpec& spec);

enum class TargetRule { first_frame, random_causal };

struct AugmentConfig {
  double search_translation = 0.25;  // max |shift| of the object, fraction of the search crop size
  double search_scale = 0.15;        // log-uniform crop-side factor in exp([-s, s])
  double target_translation = 0.05;  // fraction of the target crop size
  double target_scale = 0.05;
  double contrast = 0.2;
  double hue = 0.1;  // radians
  double saturation = 0.2;
};

struct SamplerConfig {
  int subsequence_length = 2;
  TargetRule target_rule = TargetRule::random_causal;
  AugmentConfig augment;
};

/// Crop and grid sizes shared by data preparation and inference.
struct CropGeometry {
  int target_size = 64;
  int search_size = 128;
  int stride = BackboneConfig::kStride;
  double search_ratio = 2.0;  // search crop side / target crop side, in frame pixels
  double disc_radius = 2.5;   // heatmap disc radius in grid cells

  int grid() const { return (search_size + stride - 1) / stride; }
};

struct FramePair {
  int target = 0;
  int search = 0;
};

/// Target index for a sub-sequence starting at `start` (>= 1).
int sample_target_index(int start, TargetRule rule, Rng& rng);

/// Draws t uniformly from [1, T - tau], the search index from [t, t + tau),
/// and the target index by rule. Throws if T < tau + 1.
FramePair sample_pair(const Sequence& seq, const SamplerConfig& cfg, Rng& rng);

struct TrainingExample {
  Image target_crop;
  Image search_crop;
  Image detector_frame;
  CropSpec target_spec;
  CropSpec search_spec;
  CropSpec detector_spec;
  Box search_box;
  Tensor<float> search_heat;
  OffsetTarget search_offsets;
  Tensor<float> detector_heat;
  FramePair pair;
};

/// Search crop follows the target's box on frame search - 1; augmentation
/// moves the CropSpec, so targets stay consistent with pixels. Throws
/// std::domain_error if the target is invisible in a frame it needs.
TrainingExample build_training_example(const Sequence& seq, FramePair pair, const SamplerConfig& cfg,
                                       const CropGeometry& geom, Rng& rng);

/// sample_pair + build_training_example with bounded resampling.
TrainingExample sample_training_example(const Sequence& seq, const SamplerConfig& cfg, const CropGeometry& geom,
                                        Rng& rng);

/// Square crop covering the whole frame, used as the detector input.
CropSpec full_frame_spec(int width, int height, int out_size);

/// Contrast, saturation and hue perturbation drawn from cfg; pixels only.
void photometric_augment(Image& image, const AugmentConfig& cfg, Rng& rng);

/// Layout: <root>/manifest.json, <root>/<id>/annotations.jsonl,
/// <root>/<id>/frames/%06d.png.
void write_dataset(const std::filesystem::path& root, const std::vector<Sequence>& sequences);
std::vector<Sequence> read_dataset(const std::filesystem::path& root);

/// Parses annotations.jsonl; errors name the file and 1-based line.
std::vector<Annotation> read_annotations(const std::filesystem::path& path);

}  // namespace siamtrack
