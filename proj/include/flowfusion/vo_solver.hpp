#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowfusion/clustering.hpp"
#include "flowfusion/frame.hpp"
#include "flowfusion/parallel.hpp"

namespace flowfusion {

struct ResidualImages {
  ImageD r_i;  ///< I_B(W(x)) - I_A(x)
  ImageD r_d;  ///< D_B(W(x)) - z of the transformed point (m)
  Mask valid;
};

struct SolverConfig {
  double alpha_i = 0.9;
  int pyramid_levels = 4;
  int iters_per_level = 2;
  double cauchy_k = 1.345;
  double convergence_eps = 1e-6;
  std::size_t min_valid_pixels = 200;
  double damping = 1e-6;
  int max_halvings = 5;
  double sigma0 = 0.001;
  double sigma1 = 0.0019;

  /// Throws ParameterError naming the offending field.
  void validate() const;
};

struct PixelWeights {
  ImageD w_i;
  ImageD w_d;
};

ResidualImages compute_residuals(const RgbdFrame& a, const RgbdFrame& b, const Twist& xi,
                                 Execution exec = Execution::parallel);

/// (c^2/2) log(1 + (r/c)^2). Throws ParameterError when c <= 0.
double cauchy_penalty(double r, double c);
/// IRLS weight 1 / (1 + (r/c)^2).
double cauchy_weight(double r, double c);

inline constexpr double kScaleFloor = 1e-6;

/// k * 1.4826 * MAD, floored at 1e-6. Throws DegenerateInputError with fewer
/// than max(1, min_count) samples.
double estimate_scale_c(std::span<const double> residuals, double k, std::size_t min_count = 1);

/// w_I = 1, w_D = 1 / (sigma0 + sigma1 z^2) scaled so the valid-pixel median
/// is 1. Invalid pixels get w_D = 0.
PixelWeights compute_pixel_weights(const RgbdFrame& frame, double sigma0 = 0.001, double sigma1 = 0.0019);
/// Unnormalized depth weights.
ImageD raw_depth_weights(const ImageD& depth, double sigma0, double sigma1);

struct FramePyramid {
  std::vector<ImageD> intensity;
  std::vector<ImageD> depth;
  std::vector<PinholeIntrinsics> intrinsics;
};

FramePyramid build_pyramid(const RgbdFrame& frame, int levels);

/// Per-cluster scores attached to frame A's full-resolution labels.
struct ClusterScoreView {
  const ClusterSet* clusters = nullptr;
  std::span<const double> scores;
};

/// m_p at pyramid level `level`: 1 - b of the full-resolution ancestor
/// (x << level, y << level), 1 where that ancestor is unlabeled.
ImageD static_weight_image(const ClusterScoreView& view, int width, int height, int level);

enum class VoStatus { ok, under_constrained, numerical_failure };
const char* to_string(VoStatus s);

struct VoIterationRecord {
  int level = 0;  ///< 0 is full resolution
  int iteration = 0;
  double energy_before = 0.0;
  double energy = 0.0;  ///< after the step (equal to energy_before when rejected)
  double step_norm = 0.0;
  int halvings = 0;
  bool accepted = false;
  double c_i = 0.0;
  double c_d = 0.0;
  std::size_t valid_pixels = 0;
};

struct VoResult {
  Twist xi;
  VoStatus status = VoStatus::ok;
  std::string message;
  std::vector<VoIterationRecord> iterations;
  bool ok() const { return status == VoStatus::ok; }
};

/// Coarse-to-fine Gauss-Newton IRLS on the Cauchy-robust photometric + depth
/// energy. Without scores every pixel has m_p = 1; with scores m_p = 1 - b.
/// Failures are reported through `status` and return xi0.
VoResult solve_vo(const RgbdFrame& a, const RgbdFrame& b, const SolverConfig& config, const Twist& xi0 = {},
                  std::optional<ClusterScoreView> scores = std::nullopt, Execution exec = Execution::parallel);

/// CSV columns: level,iteration,energy_before,energy,step_norm,halvings,accepted,c_i,c_d,valid_pixels
void write_vo_diagnostics_csv(const std::vector<VoIterationRecord>& records, std::ostream& out,
                              bool header = true);

}  // namespace flowfusion
