#pragma once

// Hot per-pixel loops. Each kernel has an OpenMP implementation used by the
// library and a plain serial reference kept for tests and benchmarks. The
// OpenMP versions reduce in a fixed row order, so their output does not depend
// on the thread count.

#include <optional>
#include <span>

#include "flowfusion/frame.hpp"
#include "flowfusion/geometry.hpp"

namespace flowfusion::kernels {

struct Feature {
  double x = 0.0, y = 0.0, z = 0.0, intensity = 0.0;
};

struct FeatureWeights {
  double spatial = 1.0;
  double intensity = 0.5;
};

inline double feature_distance(const Feature& a, const Feature& b, const FeatureWeights& w) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z, di = a.intensity - b.intensity;
  return w.spatial * (dx * dx + dy * dy + dz * dz) + w.intensity * di * di;
}

/// Nearest-center assignment, ties to the lowest center id. Writes the label
/// and distance of every point; returns the number of labels that changed.
std::size_t assign_nearest(std::span<const Feature> points, std::span<const Feature> centers,
                           const FeatureWeights& w, std::span<int> labels, std::span<double> dist);

/// Per-pixel ego flow W(x, xi) - x over valid depth.
FlowField ego_flow(const RgbdFrame& a, const RigidTransform& T, const PinholeIntrinsics& K);

struct LkLevelParams {
  int radius = 2;
  int iterations = 10;
  double min_eigenvalue = 1e-6;
};

/// One pyramid level of dense forward-additive Lucas-Kanade. `flow` holds the
/// initial guess and receives the refined field; `valid` flags pixels whose
/// window was well conditioned.
void lk_refine_level(const ImageD& a, const ImageD& b, const ImageD& bx, const ImageD& by,
                     const LkLevelParams& p, ImageD& flow_u, ImageD& flow_v, Mask& valid);

/// One pyramid level of the VO problem. `static_weight` is m_p and may be
/// null (all ones).
struct VoLevel {
  const ImageD* intensity_a = nullptr;
  const ImageD* depth_a = nullptr;
  const ImageD* intensity_b = nullptr;
  const ImageD* depth_b = nullptr;
  const ImageD* depth_weight = nullptr;
  const ImageD* static_weight = nullptr;
  PinholeIntrinsics K;
  double alpha_i = 1.0;
};

using Row6 = Eigen::Matrix<double, 1, 6>;

/// Residuals of one pixel and their derivatives w.r.t. a left increment
/// T <- exp(delta) T. Residuals are unscaled (no alpha or pre-weights).
struct PixelResidual {
  double r_i = 0.0;
  double r_d = 0.0;
  Row6 j_i = Row6::Zero();
  Row6 j_d = Row6::Zero();
};

std::optional<PixelResidual> pixel_residual(const VoLevel& level, const RigidTransform& T, int x, int y);

struct NormalEquations {
  Mat6 H = Mat6::Zero();
  Vec6 g = Vec6::Zero();
  double energy = 0.0;
  std::size_t count = 0;
};

/// Residual images at one level; invalid pixels carry 0.
void residual_images(const VoLevel& level, const RigidTransform& T, ImageD& r_i, ImageD& r_d, Mask& valid);

/// Robust energy and (if `with_system`) the IRLS normal equations, summed per
/// row and then over rows in order. Pixels with m_p = 0 are skipped.
NormalEquations accumulate_vo(const VoLevel& level, const RigidTransform& T, double c_i, double c_d,
                              bool with_system);

namespace serial {

std::size_t assign_nearest(std::span<const Feature> points, std::span<const Feature> centers,
                           const FeatureWeights& w, std::span<int> labels, std::span<double> dist);
FlowField ego_flow(const RgbdFrame& a, const RigidTransform& T, const PinholeIntrinsics& K);
void lk_refine_level(const ImageD& a, const ImageD& b, const ImageD& bx, const ImageD& by,
                     const LkLevelParams& p, ImageD& flow_u, ImageD& flow_v, Mask& valid);
void residual_images(const VoLevel& level, const RigidTransform& T, ImageD& r_i, ImageD& r_d, Mask& valid);
NormalEquations accumulate_vo(const VoLevel& level, const RigidTransform& T, double c_i, double c_d,
                              bool with_system);

}  // namespace serial

}  // namespace flowfusion::kernels
