#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flowfusion/frame.hpp"
#include "flowfusion/trajectory.hpp"

namespace flowfusion {

namespace fs = std::filesystem;

/// Default rgb<->depth association window (s), the TUM toolkit convention.
inline constexpr double kDefaultMaxTimeDiff = 0.02;
/// TUM depth PNG scale: meters = value / kTumDepthScale.
inline constexpr double kTumDepthScale = 5000.0;
/// Middlebury .flo magic number.
inline constexpr float kFloMagic = 202021.25f;

struct TimestampedFile {
  double timestamp = 0.0;
  std::string filename;
};

/// Parses a "timestamp filename" index; '#' lines are comments.
std::vector<TimestampedFile> read_tum_index(const fs::path& path);

/// Greedy nearest-timestamp matching. Candidate pairs with |a_i - b_j| <=
/// max_dt are taken in order of increasing |a_i - b_j|, each element used at
/// most once. Returned pairs (i, j) are sorted by i.
std::vector<std::pair<std::size_t, std::size_t>> associate_timestamps(
    const std::vector<double>& a, const std::vector<double>& b, double max_dt);

struct TumSequence {
  std::vector<RgbdFrame> frames;
  /// Ground-truth camera-to-world pose per frame, when groundtruth.txt exists
  /// and has a sample within the association window.
  std::vector<std::optional<RigidTransform>> ground_truth;
  /// Index entries skipped because an image could not be read.
  std::size_t skipped = 0;
};

/// Default intrinsics for TUM sequences without a calibration.txt.
PinholeIntrinsics default_tum_intrinsics(int width, int height);

/// Loads a TUM-layout directory (rgb.txt, depth.txt, optional
/// groundtruth.txt and calibration.txt "fx fy cx cy"). Throws IoError when an
/// index file is missing.
TumSequence load_tum_sequence(const fs::path& directory, double max_time_diff = kDefaultMaxTimeDiff,
                              std::optional<PinholeIntrinsics> intrinsics = std::nullopt);

/// Image decoding helpers (PNG through OpenCV).
ImageD read_intensity_png(const fs::path& path);
ImageD read_depth_png(const fs::path& path);
void write_intensity_png(const ImageD& intensity, const fs::path& path);
void write_depth_png(const ImageD& depth, const fs::path& path);
/// 8-bit mask: nonzero -> 255.
void write_mask_png(const Mask& mask, const fs::path& path);
Mask read_mask_png(const fs::path& path);
/// 16-bit label image; negative labels are written as 0, others as label+1.
void write_label_png(const Image<int>& labels, const fs::path& path);

/// Middlebury .flo: little-endian float magic, int32 width, int32 height,
/// then interleaved float32 (u,v) pairs, row-major. Invalid pixels are written
/// as (0,0); on read every pixel is valid.
void write_flow_file(const FlowField& field, const fs::path& path);
FlowField read_flow_file(const fs::path& path,
                         std::optional<std::pair<int, int>> expected_size = std::nullopt);

/// "timestamp tx ty tz qx qy qz qw" lines; parse errors name the line.
Trajectory read_trajectory(const fs::path& path);
void write_trajectory(const Trajectory& trajectory, const fs::path& path);

}  // namespace flowfusion
