#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "flowfusion/clustering.hpp"
#include "flowfusion/config.hpp"
#include "flowfusion/flow.hpp"
#include "flowfusion/segmentation.hpp"
#include "flowfusion/trajectory.hpp"
#include "flowfusion/vo_solver.hpp"

namespace flowfusion {

struct PipelineConfig {
  SolverConfig solver;
  SegmentationConfig segmentation;
  ClusteringParams clustering;
  /// "exact", "builtin" or "dir:<path>"; resolved into `flow` by the caller
  /// that knows where the data lives.
  std::string flow_source = "builtin";
  FlowProvider flow = PyramidalLkFlow{};
  bool segmentation_enabled = true;
  int max_outer_iterations = 8;
  double pose_eps = 1e-6;
  double score_eps = 1e-3;
  double map_voxel_size = 0.02;

  void validate() const;
};

/// Reads every pipeline key (solver.*, segmentation.*, clustering.*, flow.*,
/// pipeline.*, map.*) over the defaults. Unknown keys under those sections
/// raise ConfigError with their line.
PipelineConfig pipeline_config_from(const KeyValueConfig& cfg);
/// The effective configuration as sorted key=value lines.
std::string describe_config(const PipelineConfig& cfg);

struct OuterIterationRecord {
  int iteration = 0;
  double theta_b = 0.0;
  double theta_t = 0.0;
  double step_norm = 0.0;
  double max_score_change = 0.0;
  std::size_t changed_scores = 0;
  std::size_t dynamic_clusters = 0;
  double max_b = 0.0;
  double mean_b = 0.0;
  double vo_energy = 0.0;
};

struct FramePairResult {
  Twist xi;
  /// Eq.-1-mode estimate before any segmentation.
  Twist initial_xi;
  std::vector<double> b;
  Mask mask;
  ClusterSet clusters;
  std::vector<OuterIterationRecord> iterations;
  std::vector<VoIterationRecord> vo_iterations;
  bool converged = false;
  bool degraded = false;
  bool segmentation_degenerate = false;
  std::string message;
};

FramePairResult process_pair(const RgbdFrame& a, const RgbdFrame& b, const PipelineConfig& cfg,
                             const Twist& xi_prior = {}, Execution exec = Execution::parallel);

struct SequenceResult {
  /// Camera-to-world poses; frame 0 is the identity.
  Trajectory trajectory;
  std::vector<FramePairResult> pairs;
  std::size_t degraded_pairs = 0;
};

/// Throws InsufficientDataError with fewer than 2 frames.
SequenceResult process_sequence(const std::vector<RgbdFrame>& frames, const PipelineConfig& cfg,
                                Execution exec = Execution::parallel);

struct MapPoint {
  Vec3 position = Vec3::Zero();
  double intensity = 0.0;
};

struct StaticMap {
  std::vector<MapPoint> points;
  /// True when no static pixel was available.
  bool empty = true;
};

/// Back-projects pixels whose mask entry is 0 through the camera-to-world
/// poses and keeps one point (mean position and intensity) per voxel.
StaticMap accumulate_static_map(const std::vector<RgbdFrame>& frames, const std::vector<RigidTransform>& camera_to_world,
                                const std::vector<Mask>& dynamic_masks, double voxel_size);

/// "x y z intensity" per line.
void write_static_map(const StaticMap& map, std::ostream& out);

}  // namespace flowfusion
