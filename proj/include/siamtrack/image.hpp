#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

namespace siamtrack {

/// Interleaved (HWC) float image. Pixel values live in [0, 1]; pixel (x, y)
/// covers the continuous square [x, x + 1) x [y, y + 1).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c = 3, float fill = 0.0f)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  std::vector<float> channel_mean() const;

  bool operator==(const Image&) const = default;
};

/// Rounds every sample to the nearest multiple of 1/255 so PNG storage is lossless.
void quantize_to_8bit(Image& image);

void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// Maps a scalar field (row-major, width x height) through a blue-white-red
/// ramp spanning [lo, hi] and writes it as an RGB PNG scaled up by `zoom`.
void write_heatmap_png(const std::filesystem::path& path, const std::vector<double>& values, int width,
                       int height, double lo, double hi, int zoom = 8);

}  // namespace siamtrack
