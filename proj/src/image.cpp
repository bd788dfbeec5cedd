#include "siamtrack/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>

namespace siamtrack {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

void write_rgb8(const std::filesystem::path& path, int width, int height, int channels,
                const std::vector<std::uint8_t>& bytes) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed writing " + path.string());
  }
  png_init_io(png, f.get());
  const int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  // Fixed compression settings keep the written bytes reproducible.
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * width * channels);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

std::vector<float> Image::channel_mean() const {
  std::vector<double> acc(channels, 0.0);
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  for (std::size_t i = 0; i < pixels; ++i) {
    for (int c = 0; c < channels; ++c) acc[c] += data[i * channels + c];
  }
  std::vector<float> mean(channels, 0.0f);
  if (pixels == 0) return mean;
  for (int c = 0; c < channels; ++c) mean[c] = static_cast<float>(acc[c] / static_cast<double>(pixels));
  return mean;
}

void quantize_to_8bit(Image& image) {
  for (float& v : image.data) v = to_byte(v) / 255.0f;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("write_png: need 1 or 3 channels");
  std::vector<std::uint8_t> bytes(image.data.size());
  std::transform(image.data.begin(), image.data.end(), bytes.begin(), to_byte);
  write_rgb8(path, image.width, image.height, image.channels, bytes);
}

Image read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("failed reading " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported PNG layout in " + path.string());
  }
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y) png_read_row(png, bytes.data() + static_cast<std::size_t>(y) * width * 3, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image image(width, height, 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) image.data[i] = bytes[i] / 255.0f;
  return image;
}

void write_heatmap_png(const std::filesystem::path& path, const std::vector<double>& values, int width, int height,
                       double lo, double hi, int zoom) {
  if (static_cast<std::size_t>(width) * height != values.size()) {
    throw std::invalid_argument("write_heatmap_png: size mismatch");
  }
  const int w = width * zoom;
  const int h = height * zoom;
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * 3);
  const double span = hi > lo ? hi - lo : 1.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double t = std::clamp((values[(y / zoom) * width + x / zoom] - lo) / span, 0.0, 1.0);
      // blue -> white -> red
      double r, g, b;
      if (t < 0.5) {
        r = g = 2.0 * t;
        b = 1.0;
      } else {
        r = 1.0;
        g = b = 2.0 * (1.0 - t);
      }
      std::uint8_t* px = bytes.data() + (static_cast<std::size_t>(y) * w + x) * 3;
      px[0] = to_byte(static_cast<float>(r));
      px[1] = to_byte(static_cast<float>(g));
      px[2] = to_byte(static_cast<float>(b));
    }
  }
  write_rgb8(path, w, h, 3, bytes);
}

}  // namespace siamtrack
