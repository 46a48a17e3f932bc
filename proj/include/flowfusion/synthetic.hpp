#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowfusion/config.hpp"
#include "flowfusion/frame.hpp"
#include "flowfusion/parallel.hpp"
#include "flowfusion/trajectory.hpp"

namespace flowfusion {

/// Infinite plane {p : normal . p = offset} in world coordinates.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
};

/// Box that starts axis-aligned at `center`. Each frame it rotates about its
/// own center by exp(motion.w) and translates by motion.v, both in world axes.
struct BoxObject {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  Twist motion;
};

struct SyntheticSceneSpec {
  PinholeIntrinsics intrinsics{250.0, 250.0, 159.5, 119.5, 320, 240};
  int frame_count = 10;
  double frame_interval = 0.1;
  std::uint64_t texture_seed = 7;
  /// Coarsest value-noise lattice pitch (m); octaves halve it twice.
  double texture_cell = 0.2;
  std::vector<Plane> planes;
  std::optional<BoxObject> object;
  /// Per-frame camera motion in the A->B convention: T_cw(k+1) = exp(xi) T_cw(k).
  Twist camera_motion;
  /// World-to-camera pose of frame 0.
  RigidTransform initial_camera;

  /// Throws GenerationError naming the offending field.
  void validate() const;
};

struct GroundTruth {
  /// World-to-camera pose per frame.
  std::vector<RigidTransform> world_to_camera;
  /// True optical flow from frame k to k+1.
  std::vector<FlowField> flow;
  /// Pixels whose ray hits the moving box.
  std::vector<Mask> dynamic_mask;

  /// Twist of T_cw(b) T_cw(a)^-1, the relative motion the VO should recover.
  Twist relative_twist(std::size_t a, std::size_t b) const;
  /// Camera-to-world trajectory stamped with the given timestamps.
  Trajectory trajectory(const std::vector<double>& timestamps) const;
};

struct SyntheticSequence {
  std::vector<RgbdFrame> frames;
  GroundTruth truth;
};

/// Ray-casts every frame against the planes and the box. Pixels with no hit
/// get depth 0. Throws GenerationError for a degenerate spec (camera inside the
/// box, box not visible in frame 0, hit depth outside (0.3, 8) m).
SyntheticSequence generate_synthetic_sequence(const SyntheticSceneSpec& spec,
                                              Execution exec = Execution::parallel);

/// Seeded 3-octave value noise in [0,1], quantized to 1/255 steps.
double procedural_texture(const Vec3& p, double cell, std::uint64_t seed);

SyntheticSceneSpec parse_scene_spec(const KeyValueConfig& cfg);
SyntheticSceneSpec load_scene_spec(const std::filesystem::path& path);
std::string serialize_scene_spec(const SyntheticSceneSpec& spec);

/// Writes a TUM-layout directory (rgb/, depth/, rgb.txt, depth.txt,
/// groundtruth.txt, calibration.txt) plus gt_flow/flow_<k>_<k+1>.flo,
/// gt_masks/<k>.png and the serialized spec as scene.cfg.
void write_synthetic_dataset(const SyntheticSequence& seq, const SyntheticSceneSpec& spec,
                             const std::filesystem::path& directory);

}  // namespace flowfusion
