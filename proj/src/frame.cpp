#include "flowfusion/frame.hpp"

#include <cmath>

#include "flowfusion/error.hpp"

namespace flowfusion {

void RgbdFrame::validate() const {
  intrinsics.validate();
  if (!intensity.same_shape(intrinsics.width, intrinsics.height) ||
      !depth.same_shape(intrinsics.width, intrinsics.height)) {
    throw DimensionError("frame images do not match intrinsics size");
  }
  for (double i : intensity) {
    if (!(i >= 0.0 && i <= 1.0)) throw ParameterError("intensity outside [0,1]");
  }
  for (double d : depth) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw ParameterError("negative or non-finite depth");
  }
}

std::size_t RgbdFrame::valid_depth_count() const {
  std::size_t n = 0;
  for (double d : depth) n += d > 0.0 ? 1 : 0;
  return n;
}

}  // namespace flowfusion
