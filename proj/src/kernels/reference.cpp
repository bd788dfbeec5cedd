#include <algorithm>
#include <vector>

#include "siamtrack/kernels.hpp"

namespace siamtrack::kernels::reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output) {
  const int k = g.kernel;
  for (int co = 0; co < g.out_channels; ++co) {
    for (int oy = 0; oy < g.out_height; ++oy) {
      for (int ox = 0; ox < g.out_width; ++ox) {
        double acc = bias[co];
        for (int ci = 0; ci < g.in_channels; ++ci) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * g.stride + ky - g.pad_top;
            if (iy < 0 || iy >= g.in_height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * g.stride + kx - g.pad_left;
              if (ix < 0 || ix >= g.in_width) continue;
              acc += static_cast<double>(weight[((co * g.in_channels + ci) * k + ky) * k + kx]) *
                     input[(ci * g.in_height + iy) * g.in_width + ix];
            }
          }
        }
        output[(co * g.out_height + oy) * g.out_width + ox] = static_cast<T>(acc);
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                     std::span<const T> grad_output, std::span<T> grad_input, std::span<T> grad_weight,
                     std::span<T> grad_bias) {
  const int k = g.kernel;
  std::vector<double> dx(input.size(), 0.0);
  for (int co = 0; co < g.out_channels; ++co) {
    double db = 0.0;
    for (int oy = 0; oy < g.out_height; ++oy) {
      for (int ox = 0; ox < g.out_width; ++ox) db += grad_output[(co * g.out_height + oy) * g.out_width + ox];
    }
    grad_bias[co] += static_cast<T>(db);
    for (int ci = 0; ci < g.in_channels; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const std::size_t widx = ((co * g.in_channels + ci) * k + ky) * k + kx;
          double dw = 0.0;
          for (int oy = 0; oy < g.out_height; ++oy) {
            const int iy = oy * g.stride + ky - g.pad_top;
            if (iy < 0 || iy >= g.in_height) continue;
            for (int ox = 0; ox < g.out_width; ++ox) {
              const int ix = ox * g.stride + kx - g.pad_left;
              if (ix < 0 || ix >= g.in_width) continue;
              const double gy = grad_output[(co * g.out_height + oy) * g.out_width + ox];
              const std::size_t iidx = (ci * g.in_height + iy) * g.in_width + ix;
              dw += gy * input[iidx];
              dx[iidx] += gy * weight[widx];
            }
          }
          grad_weight[widx] += static_cast<T>(dw);
        }
      }
    }
  }
  if (!grad_input.empty()) {
    std::transform(dx.begin(), dx.end(), grad_input.begin(), [](double v) { return static_cast<T>(v); });
  }
}

template <typename T>
void xcorr_forward(const XcorrGeometry& g, std::span<const T> kernel, std::span<const T> search, std::span<T> output) {
  const int ay = g.anchor_y();
  const int ax = g.anchor_x();
  for (int c = 0; c < g.channels; ++c) {
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        double acc = 0.0;
        for (int i = 0; i < g.kernel_height; ++i) {
          for (int j = 0; j < g.kernel_width; ++j) {
            const int sy = y + i - ay;
            const int sx = x + j - ax;
            if (sy < 0 || sy >= g.height || sx < 0 || sx >= g.width) continue;
            acc += static_cast<double>(kernel[(c * g.kernel_height + i) * g.kernel_width + j]) *
                   search[(c * g.height + sy) * g.width + sx];
          }
        }
        output[(c * g.height + y) * g.width + x] = static_cast<T>(acc);
      }
    }
  }
}

template <typename T>
void xcorr_backward(const XcorrGeometry& g, std::span<const T> kernel, std::span<const T> search,
                    std::span<const T> grad_output, std::span<T> grad_kernel, std::span<T> grad_search) {
  const int ay = g.anchor_y();
  const int ax = g.anchor_x();
  std::vector<double> ds(search.size(), 0.0);
  std::vector<double> dk(kernel.size(), 0.0);
  for (int c = 0; c < g.channels; ++c) {
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        const double gy = grad_output[(c * g.height + y) * g.width + x];
        for (int i = 0; i < g.kernel_height; ++i) {
          for (int j = 0; j < g.kernel_width; ++j) {
            const int sy = y + i - ay;
            const int sx = x + j - ax;
            if (sy < 0 || sy >= g.height || sx < 0 || sx >= g.width) continue;
            const std::size_t kidx = (c * g.kernel_height + i) * g.kernel_width + j;
            const std::size_t sidx = (c * g.height + sy) * g.width + sx;
            dk[kidx] += gy * search[sidx];
            ds[sidx] += gy * kernel[kidx];
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < dk.size(); ++i) grad_kernel[i] += static_cast<T>(dk[i]);
  if (!grad_search.empty()) {
    std::transform(ds.begin(), ds.end(), grad_search.begin(), [](double v) { return static_cast<T>(v); });
  }
}

#define SIAMTRACK_INSTANTIATE(T)                                                                                     \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>, std::span<const T>, \
                                  std::span<T>);                                                                    \
  template void conv2d_backward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,                    \
                                   std::span<const T>, std::span<T>, std::span<T>, std::span<T>);                  \
  template void xcorr_forward<T>(const XcorrGeometry&, std::span<const T>, std::span<const T>, std::span<T>);      \
  template void xcorr_backward<T>(const XcorrGeometry&, std::span<const T>, std::span<const T>,                    \
                                  std::span<const T>, std::span<T>, std::span<T>);

SIAMTRACK_INSTANTIATE(float)
SIAMTRACK_INSTANTIATE(double)
#undef SIAMTRACK_INSTANTIATE

}  // namespace siamtrack::kernels::reference
