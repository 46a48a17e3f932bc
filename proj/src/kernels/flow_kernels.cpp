#include <algorithm>
#include <cmath>

#include "flowfusion/kernels.hpp"

namespace flowfusion::kernels {

namespace {

inline void ego_pixel(const RgbdFrame& a, const RigidTransform& T, const PinholeIntrinsics& K, int x, int y,
                      FlowField& out) {
  const double z = a.depth(x, y);
  if (!(z > 0.0)) return;
  const auto w = try_warp({double(x), double(y)}, z, T, K);
  if (!w) return;
  out.set(x, y, w->pixel.u - x, w->pixel.v - y);
}

// Refines the flow of one pixel in place; returns whether the window was
// well conditioned on the last iteration.
inline bool lk_pixel(const ImageD& a, const ImageD& b, const ImageD& bx, const ImageD& by, const LkLevelParams& p,
                     int x, int y, double& du, double& dv) {
  const int w = a.width();
  const int h = a.height();
  const int r = p.radius;
  const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));
  for (int it = 0; it < p.iterations; ++it) {
    double gxx = 0.0, gxy = 0.0, gyy = 0.0, ex = 0.0, ey = 0.0;
    for (int oy = -r; oy <= r; ++oy) {
      const int py = std::clamp(y + oy, 0, h - 1);
      for (int ox = -r; ox <= r; ++ox) {
        const int px = std::clamp(x + ox, 0, w - 1);
        const double u = px + du;
        const double v = py + dv;
        const double gx = sample_clamped(bx, u, v);
        const double gy = sample_clamped(by, u, v);
        const double diff = a(px, py) - sample_clamped(b, u, v);
        gxx += gx * gx;
        gxy += gx * gy;
        gyy += gy * gy;
        ex += gx * diff;
        ey += gy * diff;
      }
    }
    gxx /= n;
    gxy /= n;
    gyy /= n;
    ex /= n;
    ey /= n;
    const double half_tr = 0.5 * (gxx + gyy);
    const double half_diff = 0.5 * (gxx - gyy);
    const double min_eig = half_tr - std::sqrt(half_diff * half_diff + gxy * gxy);
    if (!(min_eig >= p.min_eigenvalue)) return false;
    const double det = gxx * gyy - gxy * gxy;
    const double ddu = (gyy * ex - gxy * ey) / det;
    const double ddv = (gxx * ey - gxy * ex) / det;
    du += ddu;
    dv += ddv;
    if (ddu * ddu + ddv * ddv < 1e-6) break;
  }
  const double tu = x + du, tv = y + dv;
  return std::isfinite(du) && std::isfinite(dv) && tu >= 0.0 && tv >= 0.0 && tu <= w - 1 && tv <= h - 1;
}

}  // namespace

FlowField ego_flow(const RgbdFrame& a, const RigidTransform& T, const PinholeIntrinsics& K) {
  FlowField out(a.width(), a.height());
  const int h = a.height();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < a.width(); ++x) ego_pixel(a, T, K, x, y, out);
  }
  return out;
}

void lk_refine_level(const ImageD& a, const ImageD& b, const ImageD& bx, const ImageD& by, const LkLevelParams& p,
                     ImageD& flow_u, ImageD& flow_v, Mask& valid) {
  const int h = a.height();
#pragma omp parallel for schedule(dynamic, 4)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < a.width(); ++x) {
      valid(x, y) = lk_pixel(a, b, bx, by, p, x, y, flow_u(x, y), flow_v(x, y)) ? 1 : 0;
    }
  }
}

namespace serial {

FlowField ego_flow(const RgbdFrame& a, const RigidTransform& T, const PinholeIntrinsics& K) {
  FlowField out(a.width(), a.height());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) ego_pixel(a, T, K, x, y, out);
  }
  return out;
}

void lk_refine_level(const ImageD& a, const ImageD& b, const ImageD& bx, const ImageD& by, const LkLevelParams& p,
                     ImageD& flow_u, ImageD& flow_v, Mask& valid) {
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      valid(x, y) = lk_pixel(a, b, bx, by, p, x, y, flow_u(x, y), flow_v(x, y)) ? 1 : 0;
    }
  }
}

}  // namespace serial

}  // namespace flowfusion::kernels
