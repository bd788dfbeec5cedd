#pragma once

#include <span>

#include "siamtrack/image.hpp"

namespace siamtrack {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box in continuous frame-pixel coordinates.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  static Box from_center(Point c, double w, double h) {
    return {c.x - 0.5 * w, c.y - 0.5 * h, c.x + 0.5 * w, c.y + 0.5 * h};
  }

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  Point center() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
  // Displacement normalizer used by the perturbation sweeps.
  double size_factor() const { return 0.5 * (width() + height()); }
  bool valid() const { return x_max >= x_min && y_max >= y_min; }

  Box translated(double dx, double dy) const {
    return {x_min + dx, y_min + dy, x_max + dx, y_max + dy};
  }
  Box clipped(const Box& bounds) const;

  bool operator==(const Box&) const = default;
};

/// Square crop region of a frame, resampled to out_size x out_size pixels.
struct CropSpec {
  Point center;
  double side = 0.0;
  int out_size = 0;

  double scale() const { return out_size / side; }
  double left() const { return center.x - 0.5 * side; }
  double top() const { return center.y - 0.5 * side; }

  Point frame_to_crop(Point p) const {
    return {(p.x - left()) * scale(), (p.y - top()) * scale()};
  }
  Point crop_to_frame(Point p) const {
    return {left() + p.x / scale(), top() + p.y / scale()};
  }
  Box frame_to_crop(const Box& b) const;
  Box crop_to_frame(const Box& b) const;
  // Footprint of the crop in frame coordinates.
  Box window() const { return Box::from_center(center, side, side); }

  CropSpec shifted(double dx, double dy) const {
    return {{center.x + dx, center.y + dy}, side, out_size};
  }
};

/// Intersection over union. Returns 0 for disjoint boxes and when the union
/// has zero area.
double iou(const Box& a, const Box& b);

/// Context-padded square crop: side = sqrt((w + p)(h + p)), p = (w + h) / 2.
/// Throws std::invalid_argument on a zero-area box.
CropSpec make_target_crop_spec(const Box& box, int out_size);

/// Target crop scaled by search_to_target_ratio around the same center.
CropSpec make_search_crop_spec(const Box& box, int out_size, double search_to_target_ratio);

/// Bilinear resample of the crop footprint. Samples outside the frame take
/// pad_value (one entry per channel).
Image crop_and_resize(const Image& image, const CropSpec& spec, std::span<const float> pad_value);

/// Same as above with the per-channel frame mean as padding.
Image crop_and_resize(const Image& image, const CropSpec& spec);

/// Output-grid cell centers sit at crop pixel stride * (cell + 0.5).
/// Cells may be fractional; (g - 1) / 2 maps to the crop center.
Point grid_to_frame(Point cell, const CropSpec& spec, int stride);
Point frame_to_grid(Point p, const CropSpec& spec, int stride);

}  // namespace siamtrack
