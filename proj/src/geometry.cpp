#include "siamtrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace siamtrack {

Box Box::clipped(const Box& bounds) const {
  Box b{std::clamp(x_min, bounds.x_min, bounds.x_max), std::clamp(y_min, bounds.y_min, bounds.y_max),
        std::clamp(x_max, bounds.x_min, bounds.x_max), std::clamp(y_max, bounds.y_min, bounds.y_max)};
  return b;
}

Box CropSpec::frame_to_crop(const Box& b) const {
  const Point tl = frame_to_crop(Point{b.x_min, b.y_min});
  const Point br = frame_to_crop(Point{b.x_max, b.y_max});
  return {tl.x, tl.y, br.x, br.y};
}

Box CropSpec::crop_to_frame(const Box& b) const {
  const Point tl = crop_to_frame(Point{b.x_min, b.y_min});
  const Point br = crop_to_frame(Point{b.x_max, b.y_max});
  return {tl.x, tl.y, br.x, br.y};
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

CropSpec make_target_crop_spec(const Box& box, int out_size) {
  if (out_size <= 0) throw std::invalid_argument("crop out_size must be positive");
  if (!box.valid() || box.area() <= 0.0) throw std::invalid_argument("degenerate annotation");
  const double w = box.width();
  const double h = box.height();
  const double p = 0.5 * (w + h);
  return {box.center(), std::sqrt((w + p) * (h + p)), out_size};
}

CropSpec make_search_crop_spec(const Box& box, int out_size, double search_to_target_ratio) {
  if (!(search_to_target_ratio > 0.0)) throw std::invalid_argument("search/target ratio must be positive");
  CropSpec spec = make_target_crop_spec(box, out_size);
  spec.side *= search_to_target_ratio;
  return spec;
}

Image crop_and_resize(const Image& image, const CropSpec& spec, std::span<const float> pad_value) {
  if (image.empty()) throw std::invalid_argument("crop_and_resize: empty image");
  if (!(spec.side > 0.0) || spec.out_size <= 0) throw std::invalid_argument("crop_and_resize: invalid crop spec");
  const int c = image.channels;
  if (static_cast<int>(pad_value.size()) != c) throw std::invalid_argument("crop_and_resize: pad size mismatch");

  const int n = spec.out_size;
  Image out(n, n, c);
  const double inv_scale = spec.side / n;
  const double left = spec.left();
  const double top = spec.top();

  auto sample = [&](int x, int y, int ch) -> float {
    if (x < 0 || y < 0 || x >= image.width || y >= image.height) return pad_value[ch];
    return image.at(x, y, ch);
  };

  for (int oy = 0; oy < n; ++oy) {
    // Continuous frame coordinate of the output pixel center, shifted to
    // sample-index space (pixel k has its center at k + 0.5).
    const double fy = top + (oy + 0.5) * inv_scale - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const float wy = static_cast<float>(fy - y0);
    for (int ox = 0; ox < n; ++ox) {
      const double fx = left + (ox + 0.5) * inv_scale - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const float wx = static_cast<float>(fx - x0);
      for (int ch = 0; ch < c; ++ch) {
        const float v00 = sample(x0, y0, ch);
        const float v10 = sample(x0 + 1, y0, ch);
        const float v01 = sample(x0, y0 + 1, ch);
        const float v11 = sample(x0 + 1, y0 + 1, ch);
        const float top_row = v00 + wx * (v10 - v00);
        const float bottom_row = v01 + wx * (v11 - v01);
        out.at(ox, oy, ch) = top_row + wy * (bottom_row - top_row);
      }
    }
  }
  return out;
}

Image crop_and_resize(const Image& image, const CropSpec& spec) {
  const std::vector<float> mean = image.channel_mean();
  return crop_and_resize(image, spec, mean);
}

Point grid_to_frame(Point cell, const CropSpec& spec, int stride) {
  return spec.crop_to_frame(Point{stride * (cell.x + 0.5), stride * (cell.y + 0.5)});
}

Point frame_to_grid(Point p, const CropSpec& spec, int stride) {
  const Point c = spec.frame_to_crop(p);
  return {c.x / stride - 0.5, c.y / stride - 0.5};
}

}  // namespace siamtrack
