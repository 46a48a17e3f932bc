#pragma once

#include <cstddef>

#include "flowfusion/geometry.hpp"
#include "flowfusion/image.hpp"

namespace flowfusion {

/// One timestamped intensity + depth pair. Intensity is in [0,1]; depth is in
/// meters with 0 meaning "no measurement".
struct RgbdFrame {
  double timestamp = 0.0;
  /// Position in the sequence; used by flow providers to find per-pair data.
  std::size_t index = 0;
  ImageD intensity;
  ImageD depth;
  PinholeIntrinsics intrinsics;

  int width() const { return intensity.width(); }
  int height() const { return intensity.height(); }
  /// Throws DimensionError / ParameterError when the invariants are violated.
  void validate() const;
  std::size_t valid_depth_count() const;
};

/// Dense per-pixel 2D displacement. Invalid pixels carry (0,0).
struct FlowField {
  ImageD u;
  ImageD v;
  Mask valid;

  FlowField() = default;
  FlowField(int width, int height) : u(width, height), v(width, height), valid(width, height, 0) {}

  int width() const { return u.width(); }
  int height() const { return u.height(); }
  bool is_valid(int x, int y) const { return valid(x, y) != 0; }
  void set(int x, int y, double du, double dv) {
    u(x, y) = du;
    v(x, y) = dv;
    valid(x, y) = 1;
  }
  void invalidate(int x, int y) {
    u(x, y) = 0.0;
    v(x, y) = 0.0;
    valid(x, y) = 0;
  }
  bool operator==(const FlowField&) const = default;
};

}  // namespace flowfusion
