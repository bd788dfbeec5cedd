#include "siamtrack/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "siamtrack/kernels.hpp"

namespace siamtrack {

namespace {

using kernels::ConvGeometry;

template <typename T>
std::span<const T> cspan(const Tensor<T>& t) {
  return t.span();
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

int branch_input_size(const BackboneConfig& cfg, Branch branch) {
  return branch == Branch::target ? cfg.target_size : cfg.search_size;
}

template <typename T>
Tensor<T> pointwise(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  const int out_c = weight.dim(0);
  const auto g = ConvGeometry::same(input.dim(0), input.dim(1), input.dim(2), out_c, 1, 1);
  Tensor<T> out({out_c, g.out_height, g.out_width});
  kernels::conv2d_forward<T>(g, cspan(input), cspan(weight), cspan(bias), out.span());
  return out;
}

}  // namespace

void BackboneConfig::validate() const {
  if (static_cast<int>(stage_channels.size()) != kLayers - 1) {
    throw std::invalid_argument("backbone needs exactly 4 stage widths before the feature layer");
  }
  for (int c : stage_channels) {
    if (c <= 0) throw std::invalid_argument("backbone stage width must be positive");
  }
  if (feature_channels <= 0 || projection_channels <= 0) {
    throw std::invalid_argument("backbone feature/projection channels must be positive");
  }
  if (target_size <= 0 || search_size <= 0 || target_size > search_size) {
    throw std::invalid_argument("backbone input sizes must satisfy 0 < target <= search");
  }
}

template <typename T>
Parameters<T> Parameters<T>::zeros(const BackboneConfig& cfg) {
  cfg.validate();
  Parameters<T> p;
  int in_c = 3;
  for (int l = 0; l < BackboneConfig::kLayers; ++l) {
    const int out_c = cfg.layer_out_channels(l);
    p.conv_weight.emplace_back(std::vector<int>{out_c, in_c, 3, 3});
    p.conv_bias.emplace_back(std::vector<int>{out_c});
    in_c = out_c;
  }
  p.projection_weight = Tensor<T>({cfg.projection_channels, cfg.feature_channels, 1, 1});
  p.projection_bias = Tensor<T>({cfg.projection_channels});
  p.tracker_weight = Tensor<T>({kTrackerChannels, cfg.projection_channels, 1, 1});
  p.tracker_bias = Tensor<T>({kTrackerChannels});
  p.detector_weight = Tensor<T>({2, cfg.projection_channels, 1, 1});
  p.detector_bias = Tensor<T>({2});
  return p;
}

template <typename T>
template <typename U>
Parameters<U> Parameters<T>::cast() const {
  Parameters<U> out;
  for (const auto& t : conv_weight) out.conv_weight.push_back(t.template cast<U>());
  for (const auto& t : conv_bias) out.conv_bias.push_back(t.template cast<U>());
  out.projection_weight = projection_weight.template cast<U>();
  out.projection_bias = projection_bias.template cast<U>();
  out.tracker_weight = tracker_weight.template cast<U>();
  out.tracker_bias = tracker_bias.template cast<U>();
  out.detector_weight = detector_weight.template cast<U>();
  out.detector_bias = detector_bias.template cast<U>();
  return out;
}

Parameters<float> init_parameters(const BackboneConfig& cfg) {
  Parameters<float> p = Parameters<float>::zeros(cfg);
  std::mt19937_64 rng(cfg.init_seed);
  auto fill_normal = [&](Tensor<float>& t, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (float& v : t.values()) v = static_cast<float>(dist(rng));
  };
  for (auto& w : p.conv_weight) fill_normal(w, std::sqrt(2.0 / (w.dim(1) * 9)));
  fill_normal(p.projection_weight, std::sqrt(1.0 / cfg.feature_channels));
  // The join sums over every target cell, so the heads start scaled down by
  // the target grid area to keep initial logits O(1).
  const double join_area = static_cast<double>(cfg.target_grid()) * cfg.target_grid();
  fill_normal(p.tracker_weight, std::sqrt(1.0 / cfg.projection_channels) / join_area);
  fill_normal(p.detector_weight, std::sqrt(1.0 / cfg.projection_channels) / join_area);
  return p;
}

template <typename T>
Tensor<T> image_to_tensor(const Image& image) {
  if (image.channels != 3) throw std::invalid_argument("image_to_tensor: expected 3 channels");
  Tensor<T> t({3, image.height, image.width});
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) t.at(c, y, x) = static_cast<T>(image.at(x, y, c) - 0.5f);
    }
  }
  return t;
}

template <typename T>
Encoding<T> encode(const Parameters<T>& params, const BackboneConfig& cfg, const Tensor<T>& input, Branch branch) {
  const int expected = branch_input_size(cfg, branch);
  if (input.rank() != 3 || input.dim(0) != 3 || input.dim(1) != expected || input.dim(2) != expected) {
    throw std::invalid_argument("encode: input must be 3x" + std::to_string(expected) + "x" +
                                std::to_string(expected));
  }
  Encoding<T> enc;
  enc.branch = branch;
  enc.activations.reserve(BackboneConfig::kLayers + 2);
  enc.activations.push_back(input);
  for (int l = 0; l < BackboneConfig::kLayers; ++l) {
    const Tensor<T>& in = enc.activations.back();
    const int out_c = cfg.layer_out_channels(l);
    const auto g = ConvGeometry::same(in.dim(0), in.dim(1), in.dim(2), out_c, 3, cfg.layer_stride(l));
    Tensor<T> out({out_c, g.out_height, g.out_width});
    kernels::conv2d_forward<T>(g, cspan(in), cspan(params.conv_weight[l]), cspan(params.conv_bias[l]), out.span());
    kernels::relu_forward<T>(out.span());
    enc.activations.push_back(std::move(out));
  }
  enc.activations.push_back(pointwise(enc.activations.back(), params.projection_weight, params.projection_bias));
  return enc;
}

template <typename T>
void encode_backward(const Parameters<T>& params, const BackboneConfig& cfg, const Encoding<T>& enc,
                     const Tensor<T>& grad_features, Parameters<T>& grads) {
  const auto& acts = enc.activations;
  const Tensor<T>& feat_in = acts[BackboneConfig::kLayers];
  Tensor<T> grad(feat_in.shape());
  {
    const auto g = ConvGeometry::same(feat_in.dim(0), feat_in.dim(1), feat_in.dim(2), cfg.projection_channels, 1, 1);
    kernels::conv2d_backward<T>(g, cspan(feat_in), cspan(params.projection_weight), cspan(grad_features),
                                grad.span(), grads.projection_weight.span(), grads.projection_bias.span());
  }
  for (int l = BackboneConfig::kLayers - 1; l >= 0; --l) {
    kernels::relu_backward<T>(cspan(acts[l + 1]), grad.span());
    const Tensor<T>& in = acts[l];
    const auto g = ConvGeometry::same(in.dim(0), in.dim(1), in.dim(2), cfg.layer_out_channels(l), 3,
                                      cfg.layer_stride(l));
    Tensor<T> grad_in;
    if (l > 0) grad_in = Tensor<T>(in.shape());
    kernels::conv2d_backward<T>(g, cspan(in), cspan(params.conv_weight[l]), cspan(grad), grad_in.span(),
                                grads.conv_weight[l].span(), grads.conv_bias[l].span());
    grad = std::move(grad_in);
  }
}

template <typename T>
Tensor<T> cross_convolve(const Tensor<T>& target_features, const Tensor<T>& search_features) {
  if (target_features.rank() != 3 || search_features.rank() != 3) {
    throw std::invalid_argument("cross_convolve: expected (C, H, W) maps");
  }
  if (target_features.dim(0) != search_features.dim(0)) throw std::invalid_argument("cross_convolve: channel mismatch");
  if (target_features.dim(1) > search_features.dim(1) || target_features.dim(2) > search_features.dim(2)) {
    throw std::invalid_argument("cross_convolve: target map larger than search map");
  }
  const kernels::XcorrGeometry g{search_features.dim(0), target_features.dim(1), target_features.dim(2),
                                 search_features.dim(1), search_features.dim(2)};
  Tensor<T> out(search_features.shape());
  kernels::xcorr_forward<T>(g, cspan(target_features), cspan(search_features), out.span());
  return out;
}

template <typename T>
void cross_convolve_backward(const Tensor<T>& target_features, const Tensor<T>& search_features,
                             const Tensor<T>& grad_joined, Tensor<T>& grad_target, Tensor<T>& grad_search) {
  const kernels::XcorrGeometry g{search_features.dim(0), target_features.dim(1), target_features.dim(2),
                                 search_features.dim(1), search_features.dim(2)};
  if (!grad_target.same_shape(target_features)) grad_target = Tensor<T>(target_features.shape());
  if (!grad_search.same_shape(search_features)) grad_search = Tensor<T>(search_features.shape());
  kernels::xcorr_backward<T>(g, cspan(target_features), cspan(search_features), cspan(grad_joined),
                             grad_target.span(), grad_search.span());
}

template <typename T>
Tensor<T> tracker_head(const Parameters<T>& params, const Tensor<T>& joined) {
  return pointwise(joined, params.tracker_weight, params.tracker_bias);
}

template <typename T>
Tensor<T> detector_head(const Parameters<T>& params, const Tensor<T>& joined) {
  return pointwise(joined, params.detector_weight, params.detector_bias);
}

Tensor<float> disc_target(Point center, int grid, double radius) {
  Tensor<float> t({grid, grid});
  const double r2 = radius * radius;
  for (int y = 0; y < grid; ++y) {
    for (int x = 0; x < grid; ++x) {
      const double dx = x - center.x;
      const double dy = y - center.y;
      if (dx * dx + dy * dy <= r2) t[static_cast<std::size_t>(y) * grid + x] = 1.0f;
    }
  }
  return t;
}

OffsetTarget encode_offsets(const Box& box, const CropSpec& spec, int stride, int grid, double disc_radius) {
  OffsetTarget target{Tensor<float>({4, grid, grid}), Tensor<float>({grid, grid})};
  const Point tl = frame_to_grid(Point{box.x_min, box.y_min}, spec, stride);
  const Point br = frame_to_grid(Point{box.x_max, box.y_max}, spec, stride);
  for (int y = 0; y < grid; ++y) {
    for (int x = 0; x < grid; ++x) {
      target.offsets.at(0, y, x) = static_cast<float>(tl.x - x);
      target.offsets.at(1, y, x) = static_cast<float>(tl.y - y);
      target.offsets.at(2, y, x) = static_cast<float>(br.x - x);
      target.offsets.at(3, y, x) = static_cast<float>(br.y - y);
    }
  }
  if (iou(box, spec.window()) > 0.0) {
    target.mask = disc_target(frame_to_grid(box.center(), spec, stride), grid, disc_radius);
  }
  return target;
}

Box decode_offsets(Point cell, const std::array<double, 4>& offsets, const CropSpec& spec, int stride) {
  const Point tl = grid_to_frame(Point{cell.x + offsets[0], cell.y + offsets[1]}, spec, stride);
  const Point br = grid_to_frame(Point{cell.x + offsets[2], cell.y + offsets[3]}, spec, stride);
  return {tl.x, tl.y, br.x, br.y};
}

template <typename T>
double heatmap_cross_entropy(const Tensor<T>& logits, const Tensor<float>& target, Tensor<T>* grad, double scale) {
  const int h = logits.dim(1);
  const int w = logits.dim(2);
  const std::size_t cells = static_cast<std::size_t>(h) * w;
  if (target.size() != cells) throw std::invalid_argument("heatmap target shape mismatch");
  const T* bg = logits.data() + kHeatBackground * cells;
  const T* fg = logits.data() + kHeatTarget * cells;
  T* gbg = grad ? grad->data() + kHeatBackground * cells : nullptr;
  T* gfg = grad ? grad->data() + kHeatTarget * cells : nullptr;
  double sum = 0.0;
  const double inv = 1.0 / static_cast<double>(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    const double d = static_cast<double>(fg[i]) - static_cast<double>(bg[i]);
    const double y = target[i] > 0.5f ? 1.0 : 0.0;
    sum += y > 0.0 ? softplus(-d) : softplus(d);
    if (grad) {
      const double g = (sigmoid(d) - y) * inv * scale;
      gfg[i] = static_cast<T>(g);
      gbg[i] = static_cast<T>(-g);
    }
  }
  return sum * inv;
}

template <typename T>
LossTerms tracker_loss(const Tensor<T>& output, const Tensor<float>& heat_target, const OffsetTarget& offset_target,
                       const LossWeights& weights, Tensor<T>* grad) {
  if (output.rank() != 3 || output.dim(0) != kTrackerChannels) {
    throw std::invalid_argument("tracker_loss: output must have 6 channels");
  }
  const std::size_t cells = static_cast<std::size_t>(output.dim(1)) * output.dim(2);
  if (offset_target.offsets.size() != 4 * cells || offset_target.mask.size() != cells) {
    throw std::invalid_argument("tracker_loss: offset target shape mismatch");
  }
  if (grad) {
    if (!grad->same_shape(output)) *grad = Tensor<T>(output.shape());
    grad->zero();
  }
  LossTerms terms;
  terms.heat = heatmap_cross_entropy(output, heat_target, grad, weights.heatmap);

  std::size_t valid = 0;
  for (std::size_t i = 0; i < cells; ++i) valid += offset_target.mask[i] > 0.5f ? 1 : 0;
  if (valid > 0) {
    const double inv = 1.0 / static_cast<double>(4 * valid);
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      const T* pred = output.data() + (kOffsetTlX + k) * cells;
      const float* tgt = offset_target.offsets.data() + k * cells;
      T* g = grad ? grad->data() + (kOffsetTlX + k) * cells : nullptr;
      for (std::size_t i = 0; i < cells; ++i) {
        if (!(offset_target.mask[i] > 0.5f)) continue;
        const double diff = static_cast<double>(pred[i]) - tgt[i];
        sum += std::abs(diff);
        if (g) g[i] = static_cast<T>(((diff > 0.0) - (diff < 0.0)) * inv * weights.offset);
      }
    }
    terms.offset = sum * inv;
  }
  terms.total = weights.heatmap * terms.heat + weights.offset * terms.offset;
  return terms;
}

LossTerms joint_loss(const LossTerms& tracker_terms, double detector_heat, const LossWeights& weights) {
  LossTerms terms = tracker_terms;
  terms.detector = detector_heat;
  terms.total = tracker_terms.total + weights.detector * detector_heat;
  return terms;
}

template <typename T>
std::vector<double> heat_probabilities(const Tensor<T>& logits) {
  const std::size_t cells = static_cast<std::size_t>(logits.dim(1)) * logits.dim(2);
  std::vector<double> p(cells);
  const T* bg = logits.data() + kHeatBackground * cells;
  const T* fg = logits.data() + kHeatTarget * cells;
  for (std::size_t i = 0; i < cells; ++i) p[i] = sigmoid(static_cast<double>(fg[i]) - static_cast<double>(bg[i]));
  return p;
}

#define SIAMTRACK_INSTANTIATE(T)                                                                                   \
  template struct Parameters<T>;                                                                                  \
  template Tensor<T> image_to_tensor<T>(const Image&);                                                            \
  template Encoding<T> encode<T>(const Parameters<T>&, const BackboneConfig&, const Tensor<T>&, Branch);          \
  template void encode_backward<T>(const Parameters<T>&, const BackboneConfig&, const Encoding<T>&,               \
                                   const Tensor<T>&, Parameters<T>&);                                             \
  template Tensor<T> cross_convolve<T>(const Tensor<T>&, const Tensor<T>&);                                       \
  template void cross_convolve_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&,      \
                                           Tensor<T>&);                                                           \
  template Tensor<T> tracker_head<T>(const Parameters<T>&, const Tensor<T>&);                                     \
  template Tensor<T> detector_head<T>(const Parameters<T>&, const Tensor<T>&);                                    \
  template double heatmap_cross_entropy<T>(const Tensor<T>&, const Tensor<float>&, Tensor<T>*, double);           \
  template LossTerms tracker_loss<T>(const Tensor<T>&, const Tensor<float>&, const OffsetTarget&,                 \
                                     const LossWeights&, Tensor<T>*);                                             \
  template std::vector<double> heat_probabilities<T>(const Tensor<T>&);

SIAMTRACK_INSTANTIATE(float)
SIAMTRACK_INSTANTIATE(double)
#undef SIAMTRACK_INSTANTIATE

template Parameters<double> Parameters<float>::cast<double>() const;
template Parameters<float> Parameters<double>::cast<float>() const;
template Parameters<float> Parameters<float>::cast<float>() const;

}  // namespace siamtrack

namespace siamtrack {

double TrackerOutput::heat_probability(int row, int col) const {
  const double d = static_cast<double>(channels.at(kHeatTarget, row, col)) - channels.at(kHeatBackground, row, col);
  return sigmoid(d);
}

std::array<double, 4> TrackerOutput::offsets(int row, int col) const {
  return {channels.at(kOffsetTlX, row, col), channels.at(kOffsetTlY, row, col), channels.at(kOffsetBrX, row, col),
          channels.at(kOffsetBrY, row, col)};
}

}  // namespace siamtrack
