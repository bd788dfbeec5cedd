#include <Eigen/Core>

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "siamtrack/kernels.hpp"

namespace siamtrack::kernels {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMatrix = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMapMatrix = Eigen::Map<const RowMatrix<T>>;

constexpr int kColumnBlock = 256;

bool is_pointwise(const ConvGeometry& g) { return g.kernel == 1 && g.stride == 1; }

// Unfolds input patches into a (C_in*K*K, H_out*W_out) matrix.
template <typename T>
void im2col(const ConvGeometry& g, const T* input, T* col) {
  const int k = g.kernel;
  const int pixels = g.out_pixels();
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < g.in_channels; ++ci) {
    const T* plane = input + static_cast<std::size_t>(ci) * g.in_height * g.in_width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + (static_cast<std::size_t>(ci * k + ky) * k + kx) * pixels;
        for (int oy = 0; oy < g.out_height; ++oy) {
          const int iy = oy * g.stride + ky - g.pad_top;
          T* dst = row + oy * g.out_width;
          if (iy < 0 || iy >= g.in_height) {
            std::fill(dst, dst + g.out_width, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.in_width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            const int ix = ox * g.stride + kx - g.pad_left;
            dst[ox] = (ix >= 0 && ix < g.in_width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* grad_input) {
  const int k = g.kernel;
  const int pixels = g.out_pixels();
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < g.in_channels; ++ci) {
    T* plane = grad_input + static_cast<std::size_t>(ci) * g.in_height * g.in_width;
    std::fill(plane, plane + static_cast<std::size_t>(g.in_height) * g.in_width, T(0));
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + (static_cast<std::size_t>(ci * k + ky) * k + kx) * pixels;
        for (int oy = 0; oy < g.out_height; ++oy) {
          const int iy = oy * g.stride + ky - g.pad_top;
          if (iy < 0 || iy >= g.in_height) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.in_width;
          const T* src = row + oy * g.out_width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            const int ix = ox * g.stride + kx - g.pad_left;
            if (ix >= 0 && ix < g.in_width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
std::vector<T>& scratch(std::size_t n) {
  thread_local std::vector<T> buffer;
  if (buffer.size() < n) buffer.resize(n);
  return buffer;
}

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

ConvGeometry ConvGeometry::same(int in_channels, int in_height, int in_width, int out_channels, int kernel,
                                int stride) {
  check(in_channels > 0 && in_height > 0 && in_width > 0 && out_channels > 0, "conv: empty geometry");
  check(kernel > 0 && stride > 0, "conv: kernel and stride must be positive");
  ConvGeometry g;
  g.in_channels = in_channels;
  g.in_height = in_height;
  g.in_width = in_width;
  g.out_channels = out_channels;
  g.kernel = kernel;
  g.stride = stride;
  g.out_height = (in_height + stride - 1) / stride;
  g.out_width = (in_width + stride - 1) / stride;
  const int pad_h = std::max((g.out_height - 1) * stride + kernel - in_height, 0);
  const int pad_w = std::max((g.out_width - 1) * stride + kernel - in_width, 0);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output) {
  const int pixels = g.out_pixels();
  const int patch = g.patch_size();
  check(input.size() == static_cast<std::size_t>(g.in_channels) * g.in_height * g.in_width, "conv: input size");
  check(weight.size() == static_cast<std::size_t>(g.out_channels) * patch, "conv: weight size");
  check(bias.size() == static_cast<std::size_t>(g.out_channels), "conv: bias size");
  check(output.size() == static_cast<std::size_t>(g.out_channels) * pixels, "conv: output size");

  const T* col_ptr = input.data();
  if (!is_pointwise(g)) {
    std::vector<T>& col = scratch<T>(static_cast<std::size_t>(patch) * pixels);
    im2col(g, input.data(), col.data());
    col_ptr = col.data();
  }
  ConstMapMatrix<T> w(weight.data(), g.out_channels, patch);
  ConstMapMatrix<T> col(col_ptr, patch, pixels);
  MapMatrix<T> out(output.data(), g.out_channels, pixels);
  const int blocks = (pixels + kColumnBlock - 1) / kColumnBlock;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < blocks; ++b) {
    const int c0 = b * kColumnBlock;
    const int n = std::min(kColumnBlock, pixels - c0);
    out.middleCols(c0, n).noalias() = w * col.middleCols(c0, n);
    for (int co = 0; co < g.out_channels; ++co) out.row(co).segment(c0, n).array() += bias[co];
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                     std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias) {
  const int pixels = g.out_pixels();
  const int patch = g.patch_size();
  check(grad_output.size() == static_cast<std::size_t>(g.out_channels) * pixels, "conv: grad_output size");
  check(grad_weight.size() == weight.size(), "conv: grad_weight size");
  check(grad_bias.size() == static_cast<std::size_t>(g.out_channels), "conv: grad_bias size");

  const T* col_ptr = input.data();
  if (!is_pointwise(g)) {
    std::vector<T>& col = scratch<T>(static_cast<std::size_t>(patch) * pixels);
    im2col(g, input.data(), col.data());
    col_ptr = col.data();
  }
  ConstMapMatrix<T> col(col_ptr, patch, pixels);
  ConstMapMatrix<T> dy(grad_output.data(), g.out_channels, pixels);
  ConstMapMatrix<T> w(weight.data(), g.out_channels, patch);
  MapMatrix<T> dw(grad_weight.data(), g.out_channels, patch);

  // A full GEMM packs its operands, so the summation order does not depend
  // on buffer alignment; row-vector products and .sum() would.
  dw.noalias() += dy * col.transpose();
#pragma omp parallel for schedule(static)
  for (int co = 0; co < g.out_channels; ++co) {
    const T* row = grad_output.data() + static_cast<std::size_t>(co) * pixels;
    T acc = T(0);
    for (int i = 0; i < pixels; ++i) acc += row[i];
    grad_bias[co] += acc;
  }

  if (grad_input.empty()) return;
  check(grad_input.size() == input.size(), "conv: grad_input size");
  if (is_pointwise(g)) {
    MapMatrix<T> dx(grad_input.data(), patch, pixels);
    const int blocks = (pixels + kColumnBlock - 1) / kColumnBlock;
#pragma omp parallel for schedule(static)
    for (int b = 0; b < blocks; ++b) {
      const int c0 = b * kColumnBlock;
      const int n = std::min(kColumnBlock, pixels - c0);
      dx.middleCols(c0, n).noalias() = w.transpose() * dy.middleCols(c0, n);
    }
    return;
  }
  // Separate buffer from the im2col scratch, which is still referenced above.
  thread_local std::vector<T> dcol_buffer;
  dcol_buffer.resize(static_cast<std::size_t>(patch) * pixels);
  MapMatrix<T> dcol(dcol_buffer.data(), patch, pixels);
  const int blocks = (pixels + kColumnBlock - 1) / kColumnBlock;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < blocks; ++b) {
    const int c0 = b * kColumnBlock;
    const int n = std::min(kColumnBlock, pixels - c0);
    dcol.middleCols(c0, n).noalias() = w.transpose() * dy.middleCols(c0, n);
  }
  col2im(g, dcol_buffer.data(), grad_input.data());
}

template <typename T>
void xcorr_forward(const XcorrGeometry& g, std::span<const T> kernel, std::span<const T> search, std::span<T> output) {
  const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t kplane = static_cast<std::size_t>(g.kernel_height) * g.kernel_width;
  check(kernel.size() == kplane * g.channels, "xcorr: kernel size");
  check(search.size() == plane * g.channels && output.size() == search.size(), "xcorr: search/output size");
  const int ay = g.anchor_y();
  const int ax = g.anchor_x();

#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    const T* k = kernel.data() + c * kplane;
    const T* s = search.data() + c * plane;
    T* out = output.data() + c * plane;
    std::fill(out, out + plane, T(0));
    for (int y = 0; y < g.height; ++y) {
      T* out_row = out + static_cast<std::size_t>(y) * g.width;
      for (int i = 0; i < g.kernel_height; ++i) {
        const int sy = y + i - ay;
        if (sy < 0 || sy >= g.height) continue;
        const T* s_row = s + static_cast<std::size_t>(sy) * g.width;
        for (int j = 0; j < g.kernel_width; ++j) {
          const T kv = k[i * g.kernel_width + j];
          const int shift = j - ax;
          const int x0 = std::max(0, -shift);
          const int x1 = std::min(g.width, g.width - shift);
          for (int x = x0; x < x1; ++x) out_row[x] += kv * s_row[x + shift];
        }
      }
    }
  }
}

template <typename T>
void xcorr_backward(const XcorrGeometry& g, std::span<const T> kernel, std::span<const T> search,
                    std::span<const T> grad_output, std::span<T> grad_kernel, std::span<T> grad_search) {
  const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t kplane = static_cast<std::size_t>(g.kernel_height) * g.kernel_width;
  check(grad_output.size() == plane * g.channels, "xcorr: grad_output size");
  check(grad_kernel.size() == kernel.size(), "xcorr: grad_kernel size");
  const bool want_search = !grad_search.empty();
  if (want_search) check(grad_search.size() == search.size(), "xcorr: grad_search size");
  const int ay = g.anchor_y();
  const int ax = g.anchor_x();

#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    const T* k = kernel.data() + c * kplane;
    const T* s = search.data() + c * plane;
    const T* dy = grad_output.data() + c * plane;
    T* dk = grad_kernel.data() + c * kplane;
    T* ds = want_search ? grad_search.data() + c * plane : nullptr;
    if (ds) std::fill(ds, ds + plane, T(0));
    for (int i = 0; i < g.kernel_height; ++i) {
      const int y0 = std::max(0, ay - i);
      const int y1 = std::min(g.height, g.height + ay - i);
      for (int j = 0; j < g.kernel_width; ++j) {
        const int shift = j - ax;
        const int x0 = std::max(0, -shift);
        const int x1 = std::min(g.width, g.width - shift);
        const T kv = k[i * g.kernel_width + j];
        T acc = T(0);
        for (int y = y0; y < y1; ++y) {
          const T* dy_row = dy + static_cast<std::size_t>(y) * g.width;
          const T* s_row = s + static_cast<std::size_t>(y + i - ay) * g.width + shift;
#pragma omp simd reduction(+ : acc)
          for (int x = x0; x < x1; ++x) acc += dy_row[x] * s_row[x];
          if (ds) {
            T* ds_row = ds + static_cast<std::size_t>(y + i - ay) * g.width + shift;
            for (int x = x0; x < x1; ++x) ds_row[x] += kv * dy_row[x];
          }
        }
        dk[i * g.kernel_width + j] += acc;
      }
    }
  }
}

template <typename T>
void relu_forward(std::span<T> values) {
  for (T& v : values) v = v > T(0) ? v : T(0);
}

template <typename T>
void relu_backward(std::span<const T> activation, std::span<T> grad) {
  check(activation.size() == grad.size(), "relu: size mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > T(0))) grad[i] = T(0);
  }
}

#define SIAMTRACK_INSTANTIATE(T)                                                                                     \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>, std::span<const T>, \
                                  std::span<T>);                                                                    \
  template void conv2d_backward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,                    \
                                   std::span<const T>, std::span<T>, std::span<T>, std::span<T>);                  \
  template void xcorr_forward<T>(const XcorrGeometry&, std::span<const T>, std::span<const T>, std::span<T>);      \
  template void xcorr_backward<T>(const XcorrGeometry&, std::span<const T>, std::span<const T>,                    \
                                  std::span<const T>, std::span<T>, std::span<T>);                                 \
  template void relu_forward<T>(std::span<T>);                                                                      \
  template void relu_backward<T>(std::span<const T>, std::span<T>);

SIAMTRACK_INSTANTIATE(float)
SIAMTRACK_INSTANTIATE(double)
#undef SIAMTRACK_INSTANTIATE

}  // namespace siamtrack::kernels
