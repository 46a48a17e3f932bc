#pragma once

#include <filesystem>
#include <memory>
#include <variant>
#include <vector>

#include "flowfusion/frame.hpp"
#include "flowfusion/parallel.hpp"

namespace flowfusion {

/// Ground-truth flow from a synthetic sequence; entry k is the pair (k, k+1).
struct ExactSyntheticFlow {
  std::shared_ptr<const std::vector<FlowField>> flows;
};

/// Built-in dense coarse-to-fine forward-additive Lucas-Kanade.
struct PyramidalLkFlow {
  int levels = 4;
  int window = 5;
  int iterations = 10;
  /// Pixels whose normalized structure-tensor minimum eigenvalue falls below
  /// this are marked invalid at the finest level.
  double min_eigenvalue = 1e-6;
};

/// Loads flow_<A-index>_<B-index>.flo from a directory.
struct FileImportFlow {
  std::filesystem::path directory;

  /// Throws ProviderError naming the directory when it does not exist.
  static FileImportFlow open(const std::filesystem::path& directory);
  std::filesystem::path file_for(std::size_t a, std::size_t b) const;
};

using FlowProvider = std::variant<ExactSyntheticFlow, PyramidalLkFlow, FileImportFlow>;

/// Optical flow A -> B from the active provider. Throws DimensionError when
/// the frames differ in size and ProviderError when the provider has no data
/// for the pair.
FlowField compute_optical_flow(const FlowProvider& provider, const RgbdFrame& a, const RgbdFrame& b,
                               Execution exec = Execution::parallel);

FlowField pyramidal_lucas_kanade(const ImageD& a, const ImageD& b, const PyramidalLkFlow& params,
                                 Execution exec = Execution::parallel);

/// Camera ego flow W(x, xi) - x for each valid-depth pixel of A. Pixels with
/// invalid depth or warping behind camera B are marked invalid.
FlowField compute_ego_flow(const RgbdFrame& a, const Twist& xi, const PinholeIntrinsics& K,
                           Execution exec = Execution::parallel);

/// Per-pixel flow residual magnitude; valid only where both inputs are valid.
struct FlowResidualField {
  ImageD magnitude;
  Mask valid;
};

/// r_F = |of - ego| per pixel. Throws DimensionError on size mismatch.
FlowResidualField compute_flow_residual(const FlowField& optical, const FlowField& ego);

}  // namespace flowfusion
