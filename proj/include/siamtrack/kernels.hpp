#pragma once

#include <span>

namespace siamtrack::kernels {

/// Shape bookkeeping for a square-kernel 2-D convolution with "same" padding
/// (output side = ceil(input / stride), extra padding goes bottom/right).
struct ConvGeometry {
  int in_channels = 0;
  int in_height = 0;
  int in_width = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int out_height = 0;
  int out_width = 0;
  int pad_top = 0;
  int pad_left = 0;

  static ConvGeometry same(int in_channels, int in_height, int in_width, int out_channels, int kernel, int stride);

  int patch_size() const { return in_channels * kernel * kernel; }
  int out_pixels() const { return out_height * out_width; }
};

/// Depthwise "same" correlation: kernel (C, kh, kw) slides over search
/// (C, h, w); output is (C, h, w). Kernel tap (i, j) reads search row
/// y + i - (kh - 1) / 2 and column x + j - (kw - 1) / 2.
struct XcorrGeometry {
  int channels = 0;
  int kernel_height = 0;
  int kernel_width = 0;
  int height = 0;
  int width = 0;

  int anchor_y() const { return (kernel_height - 1) / 2; }
  int anchor_x() const { return (kernel_width - 1) / 2; }
};

// OpenMP-parallel implementations. Gradient outputs named grad_weight,
// grad_bias and grad_kernel accumulate (+=); grad_input and grad_search are
// overwritten. An empty grad_input span skips that computation.

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output);

template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                     std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias);

template <typename T>
void xcorr_forward(const XcorrGeometry& g, std::span<const T> kernel, std::span<const T> search, std::span<T> output);

template <typename T>
void xcorr_backward(const XcorrGeometry& g, std::span<const T> kernel, std::span<const T> search,
                    std::span<const T> grad_output, std::span<T> grad_kernel, std::span<T> grad_search);

template <typename T>
void relu_forward(std::span<T> values);

/// Zeroes gradient entries whose post-activation value is not positive.
template <typename T>
void relu_backward(std::span<const T> activation, std::span<T> grad);

/// Serial nested-loop versions with double accumulation; kept as the oracle
/// for the parallel kernels and for gradient checks.
namespace reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output);

template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                     std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias);

template <typename T>
void xcorr_forward(const XcorrGeometry& g, std::span<const T> kernel, std::span<const T> search, std::span<T> output);

template <typename T>
void xcorr_backward(const XcorrGeometry& g, std::span<const T> kernel, std::span<const T> search,
                    std::span<const T> grad_output, std::span<T> grad_kernel, std::span<T> grad_search);

}  // namespace reference

}  // namespace siamtrack::kernels
