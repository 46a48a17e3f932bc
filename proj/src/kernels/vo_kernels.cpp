#include <cmath>
#include <vector>

#include "flowfusion/kernels.hpp"

namespace flowfusion::kernels {

namespace {

inline double cauchy_c(double r, double c) { return 0.5 * c * c * std::log1p((r / c) * (r / c)); }
inline double cauchy_w(double r, double c) { return 1.0 / (1.0 + (r / c) * (r / c)); }

inline double static_weight(const VoLevel& L, int x, int y) {
  return L.static_weight ? (*L.static_weight)(x, y) : 1.0;
}

void accumulate_row(const VoLevel& L, const RigidTransform& T, double c_i, double c_d, bool with_system, int y,
                    NormalEquations& acc) {
  for (int x = 0; x < L.intensity_a->width(); ++x) {
    const double m = static_weight(L, x, y);
    if (!(m > 0.0)) continue;
    const auto pr = pixel_residual(L, T, x, y);
    if (!pr) continue;
    const double wd = (*L.depth_weight)(x, y);
    const double s_i = L.alpha_i * pr->r_i;
    const double s_d = wd * pr->r_d;
    acc.energy += m * (cauchy_c(s_i, c_i) + cauchy_c(s_d, c_d));
    ++acc.count;
    if (!with_system) continue;
    const Row6 js_i = L.alpha_i * pr->j_i;
    const Row6 js_d = wd * pr->j_d;
    const double wi = m * cauchy_w(s_i, c_i);
    const double wdd = m * cauchy_w(s_d, c_d);
    acc.H.noalias() += wi * js_i.transpose() * js_i + wdd * js_d.transpose() * js_d;
    acc.g.noalias() += wi * s_i * js_i.transpose() + wdd * s_d * js_d.transpose();
  }
}

NormalEquations sum_rows(const std::vector<NormalEquations>& rows) {
  NormalEquations total;
  for (const auto& r : rows) {
    total.H += r.H;
    total.g += r.g;
    total.energy += r.energy;
    total.count += r.count;
  }
  return total;
}

void residual_row(const VoLevel& L, const RigidTransform& T, int y, ImageD& r_i, ImageD& r_d, Mask& valid) {
  for (int x = 0; x < L.intensity_a->width(); ++x) {
    const auto pr = pixel_residual(L, T, x, y);
    if (pr) {
      r_i(x, y) = pr->r_i;
      r_d(x, y) = pr->r_d;
      valid(x, y) = 1;
    } else {
      r_i(x, y) = 0.0;
      r_d(x, y) = 0.0;
      valid(x, y) = 0;
    }
  }
}

}  // namespace

std::optional<PixelResidual> pixel_residual(const VoLevel& L, const RigidTransform& T, int x, int y) {
  const double z = (*L.depth_a)(x, y);
  if (!(z > 0.0)) return std::nullopt;
  const auto w = try_warp({double(x), double(y)}, z, T, L.K);
  if (!w) return std::nullopt;
  BilinearSample si, sd;
  if (!sample_bilinear(*L.intensity_b, w->pixel.u, w->pixel.v, si)) return std::nullopt;
  if (!sample_bilinear_valid(*L.depth_b, w->pixel.u, w->pixel.v, sd)) return std::nullopt;

  PixelResidual out;
  out.r_i = si.value - (*L.intensity_a)(x, y);
  out.r_d = sd.value - w->z;

  const Vec3& q = w->point;
  const double iz = 1.0 / q.z();
  Eigen::Matrix<double, 2, 3> dpi;
  dpi << L.K.fx * iz, 0.0, -L.K.fx * q.x() * iz * iz, 0.0, L.K.fy * iz, -L.K.fy * q.y() * iz * iz;
  Eigen::Matrix<double, 3, 6> dq;
  dq.leftCols<3>().setIdentity();
  dq.rightCols<3>() = -skew(q);
  const Eigen::Matrix<double, 2, 6> duv = dpi * dq;
  out.j_i = si.du * duv.row(0) + si.dv * duv.row(1);
  out.j_d = sd.du * duv.row(0) + sd.dv * duv.row(1) - dq.row(2);
  return out;
}

void residual_images(const VoLevel& L, const RigidTransform& T, ImageD& r_i, ImageD& r_d, Mask& valid) {
  const int h = L.intensity_a->height();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) residual_row(L, T, y, r_i, r_d, valid);
}

NormalEquations accumulate_vo(const VoLevel& L, const RigidTransform& T, double c_i, double c_d,
                              bool with_system) {
  const int h = L.intensity_a->height();
  std::vector<NormalEquations> rows(static_cast<std::size_t>(h));
#pragma omp parallel for schedule(dynamic, 8)
  for (int y = 0; y < h; ++y) accumulate_row(L, T, c_i, c_d, with_system, y, rows[y]);
  return sum_rows(rows);
}

namespace serial {

void residual_images(const VoLevel& L, const RigidTransform& T, ImageD& r_i, ImageD& r_d, Mask& valid) {
  for (int y = 0; y < L.intensity_a->height(); ++y) residual_row(L, T, y, r_i, r_d, valid);
}

NormalEquations accumulate_vo(const VoLevel& L, const RigidTransform& T, double c_i, double c_d,
                              bool with_system) {
  std::vector<NormalEquations> rows(static_cast<std::size_t>(L.intensity_a->height()));
  for (int y = 0; y < L.intensity_a->height(); ++y) accumulate_row(L, T, c_i, c_d, with_system, y, rows[y]);
  return sum_rows(rows);
}

}  // namespace serial

}  // namespace flowfusion::kernels
