#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "siamtrack/geometry.hpp"
#include "siamtrack/image.hpp"
#include "siamtrack/tensor.hpp"

namespace siamtrack {

/// Backbone shape. Five 3x3 convolutions (stride 2, 2, 1, 1, 1) with ReLU,
/// then a linear 1x1 projection shared by every branch.
struct BackboneConfig {
  static constexpr int kStride = 4;
  static constexpr int kLayers = 5;

  std::vector<int> stage_channels{16, 32, 32, 32};  // conv1..conv4
  int feature_channels = 32;                         // conv5
  int projection_channels = 32;
  std::uint64_t init_seed = 0;
  int target_size = 64;
  int search_size = 128;

  int target_grid() const { return (target_size + kStride - 1) / kStride; }
  int search_grid() const { return (search_size + kStride - 1) / kStride; }
  int layer_out_channels(int layer) const {
    return layer + 1 < kLayers ? stage_channels.at(layer) : feature_channels;
  }
  int layer_stride(int layer) const { return layer < 2 ? 2 : 1; }
  void validate() const;

  bool operator==(const BackboneConfig&) const = default;
};

struct LossWeights {
  double heatmap = 1.0;
  double offset = 0.3;
  double detector = 1.0;
};

enum class Branch { target, search, detector };

/// Canonical channel layout of the tracker output.
enum TrackerChannel : int {
  kHeatBackground = 0,
  kHeatTarget = 1,
  kOffsetTlX = 2,
  kOffsetTlY = 3,
  kOffsetBrX = 4,
  kOffsetBrY = 5,
  kTrackerChannels = 6,
};

template <typename T>
struct Parameters {
  std::vector<Tensor<T>> conv_weight;
  std::vector<Tensor<T>> conv_bias;
  Tensor<T> projection_weight;
  Tensor<T> projection_bias;
  Tensor<T> tracker_weight;
  Tensor<T> tracker_bias;
  Tensor<T> detector_weight;
  Tensor<T> detector_bias;

  /// Zero-filled parameters shaped for cfg.
  static Parameters zeros(const BackboneConfig& cfg);

  /// Visits every tensor with its canonical name in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    for (std::size_t i = 0; i < conv_weight.size(); ++i) {
      f("backbone.conv" + std::to_string(i + 1) + ".weight", conv_weight[i]);
      f("backbone.conv" + std::to_string(i + 1) + ".bias", conv_bias[i]);
    }
    f(std::string("projection.weight"), projection_weight);
    f(std::string("projection.bias"), projection_bias);
    f(std::string("tracker_head.weight"), tracker_weight);
    f(std::string("tracker_head.bias"), tracker_bias);
    f(std::string("detector_head.weight"), detector_weight);
    f(std::string("detector_head.bias"), detector_bias);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<Parameters*>(this)->for_each([&](const std::string& name, Tensor<T>& t) {
      f(name, static_cast<const Tensor<T>&>(t));
    });
  }

  template <typename U>
  Parameters<U> cast() const;

  bool operator==(const Parameters&) const = default;
};

/// He-normal convolution weights drawn from cfg.init_seed; zero biases.
Parameters<float> init_parameters(const BackboneConfig& cfg);

/// Pixel values recentred to [-0.5, 0.5], laid out (3, H, W).
template <typename T>
Tensor<T> image_to_tensor(const Image& image);

/// Activations kept for the backward pass. activations[0] is the input,
/// activations[1..5] the post-ReLU conv outputs, back() the projection.
template <typename T>
struct Encoding {
  Branch branch = Branch::search;
  std::vector<Tensor<T>> activations;

  const Tensor<T>& features() const { return activations.back(); }
};

/// Shared backbone + 1x1 projection. Throws if the input side does not match
/// the configured target (for Branch::target) or search size.
template <typename T>
Encoding<T> encode(const Parameters<T>& params, const BackboneConfig& cfg, const Tensor<T>& input, Branch branch);

/// Accumulates parameter gradients for d(loss)/d(features).
template <typename T>
void encode_backward(const Parameters<T>& params, const BackboneConfig& cfg, const Encoding<T>& enc,
                     const Tensor<T>& grad_features, Parameters<T>& grads);

/// Depthwise "same" correlation of each search channel with the matching
/// target channel. Output has the search map's shape.
template <typename T>
Tensor<T> cross_convolve(const Tensor<T>& target_features, const Tensor<T>& search_features);

template <typename T>
void cross_convolve_backward(const Tensor<T>& target_features, const Tensor<T>& search_features,
                             const Tensor<T>& grad_joined, Tensor<T>& grad_target, Tensor<T>& grad_search);

/// The only trainable layer after the join: a 1x1 convolution to six
/// channels (two heatmap logits, four corner offsets in grid units).
template <typename T>
Tensor<T> tracker_head(const Parameters<T>& params, const Tensor<T>& joined);

/// 1x1 convolution to two heatmap logits over the detector join.
template <typename T>
Tensor<T> detector_head(const Parameters<T>& params, const Tensor<T>& joined);

/// Heatmap target: ones on the disc of `radius` cells around `center`
/// (fractional grid coordinates), zeros elsewhere.
Tensor<float> disc_target(Point center, int grid, double radius);

struct OffsetTarget {
  Tensor<float> offsets;  // (4, g, g): tl_dx, tl_dy, br_dx, br_dy in grid units
  Tensor<float> mask;     // (g, g) cells that carry offset supervision
};

/// Offsets from every cell to the box corners in grid units. The mask is the
/// positive disc around the box center, or empty if the box misses the crop.
OffsetTarget encode_offsets(const Box& box, const CropSpec& spec, int stride, int grid, double disc_radius);

/// Inverse of encode_offsets for one (possibly fractional) cell.
Box decode_offsets(Point cell, const std::array<double, 4>& offsets, const CropSpec& spec, int stride);

struct LossTerms {
  double heat = 0.0;
  double offset = 0.0;
  double detector = 0.0;
  double total = 0.0;
};

/// Mean over cells of the two-class softmax cross-entropy against a binary
/// target. When grad is non-null, writes d(mean CE)/d(logits) scaled by
/// `scale` into the first two channels of *grad.
template <typename T>
double heatmap_cross_entropy(const Tensor<T>& logits, const Tensor<float>& target, Tensor<T>* grad, double scale);

/// w_heatmap * CE + w_offset * masked mean absolute error. Offset term is 0
/// for an empty mask. grad (if given) is resized to the output shape.
template <typename T>
LossTerms tracker_loss(const Tensor<T>& output, const Tensor<float>& heat_target, const OffsetTarget& offset_target,
                       const LossWeights& weights, Tensor<T>* grad = nullptr);

/// tracker total + w_detector * detector CE.
LossTerms joint_loss(const LossTerms& tracker_terms, double detector_heat, const LossWeights& weights);

/// Raw tracker head output, (6, g, g) in TrackerChannel order.
struct TrackerOutput {
  Tensor<float> channels;

  int grid() const { return channels.dim(1); }
  /// Positive-class softmax probability at (row, col).
  double heat_probability(int row, int col) const;
  /// (tl_dx, tl_dy, br_dx, br_dy) in grid units at (row, col).
  std::array<double, 4> offsets(int row, int col) const;
};

/// Parameters plus the configuration they were built for.
struct TrackerModel {
  BackboneConfig config;
  Parameters<float> params;
};

/// Positive-class probability per cell, row-major (g * g).
template <typename T>
std::vector<double> heat_probabilities(const Tensor<T>& logits);

}  // namespace siamtrack
