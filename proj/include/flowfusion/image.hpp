#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "flowfusion/error.hpp"

namespace flowfusion {

/// Dense row-major single-channel image. Pixel (0,0) is the top-left pixel and
/// continuous coordinates place integer values at pixel centers.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 0 || height < 0) throw DimensionError("negative image size");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool same_shape(int w, int h) const { return w == width_ && h == height_; }
  template <typename U>
  bool same_shape(const Image<U>& o) const {
    return o.width() == width_ && o.height() == height_;
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool operator==(const Image&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using ImageD = Image<double>;
using Mask = Image<unsigned char>;

/// Bilinear sample plus the exact partial derivatives of the interpolant.
struct BilinearSample {
  double value = 0.0;
  double du = 0.0;
  double dv = 0.0;
};

/// Bilinear lookup at continuous (u, v). Returns false when the 2x2 support
/// leaves the image. The derivatives are those of the piecewise-bilinear
/// interpolant itself, so they agree with finite differences of `value`.
inline bool sample_bilinear(const ImageD& img, double u, double v, BilinearSample& out) {
  if (!(u >= 0.0) || !(v >= 0.0)) return false;
  const double max_u = img.width() - 1;
  const double max_v = img.height() - 1;
  if (!(u <= max_u) || !(v <= max_v)) return false;
  int x0 = static_cast<int>(u);
  int y0 = static_cast<int>(v);
  // keep a full 2x2 support on the last row/column
  if (x0 == img.width() - 1 && x0 > 0) --x0;
  if (y0 == img.height() - 1 && y0 > 0) --y0;
  const int x1 = x0 + 1 < img.width() ? x0 + 1 : x0;
  const int y1 = y0 + 1 < img.height() ? y0 + 1 : y0;
  const double a = u - x0;
  const double b = v - y0;
  const double i00 = img(x0, y0), i10 = img(x1, y0);
  const double i01 = img(x0, y1), i11 = img(x1, y1);
  const double top = i00 + a * (i10 - i00);
  const double bottom = i01 + a * (i11 - i01);
  out.value = top + b * (bottom - top);
  out.du = (1.0 - b) * (i10 - i00) + b * (i11 - i01);
  out.dv = bottom - top;
  return true;
}

/// Like sample_bilinear but refuses supports touching a zero (invalid) entry.
inline bool sample_bilinear_valid(const ImageD& img, double u, double v, BilinearSample& out) {
  if (!sample_bilinear(img, u, v, out)) return false;
  int x0 = static_cast<int>(u);
  int y0 = static_cast<int>(v);
  if (x0 == img.width() - 1 && x0 > 0) --x0;
  if (y0 == img.height() - 1 && y0 > 0) --y0;
  const int x1 = x0 + 1 < img.width() ? x0 + 1 : x0;
  const int y1 = y0 + 1 < img.height() ? y0 + 1 : y0;
  return img(x0, y0) > 0.0 && img(x1, y0) > 0.0 && img(x0, y1) > 0.0 && img(x1, y1) > 0.0;
}

/// Bilinear sample with border clamping; never fails.
inline double sample_clamped(const ImageD& img, double u, double v) {
  const double max_u = img.width() - 1;
  const double max_v = img.height() - 1;
  u = u < 0.0 ? 0.0 : (u > max_u ? max_u : u);
  v = v < 0.0 ? 0.0 : (v > max_v ? max_v : v);
  BilinearSample s;
  sample_bilinear(img, u, v, s);
  return s.value;
}

/// 2x average pooling; odd trailing rows/columns are dropped.
ImageD downsample_average(const ImageD& img);
/// 2x depth pooling: median of the valid (> 0) entries of each 2x2 block,
/// 0 when the block has none.
ImageD downsample_depth_median(const ImageD& depth);
/// Central-difference gradients, one-sided at the border.
ImageD gradient_x(const ImageD& img);
ImageD gradient_y(const ImageD& img);

}  // namespace flowfusion
