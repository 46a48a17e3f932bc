#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "flowfusion/clustering.hpp"
#include "flowfusion/flow.hpp"
#include "flowfusion/vo_solver.hpp"

namespace flowfusion {

struct ClusterResidual {
  std::vector<double> delta;
  std::vector<std::size_t> valid_count;
  /// Clusters without a single valid pixel; their delta is 0.
  std::vector<unsigned char> flagged;

  std::size_t size() const { return delta.size(); }
};

enum class ThresholdMode { fixed, adaptive };

struct SegmentationConfig {
  double alpha_i = 0.9;
  double alpha_f = 0.022;
  ThresholdMode mode = ThresholdMode::fixed;
  double theta_b = 0.05;
  double theta_t = 0.15;
  double static_cutoff = 0.5;
  /// Multiplier on the graph smoothness term.
  double lambda_g = 1.0;

  void validate() const;
};

/// Mean of alpha_I |r_I| + |r_D| / D_i + alpha_F r_F over the cluster's pixels
/// where both the photometric/depth residual and the flow residual are valid.
ClusterResidual aggregate_cluster_residuals(const ClusterSet& clusters, const ResidualImages& residuals,
                                            const FlowResidualField& flow_residual, const SegmentationConfig& cfg);

double assignment_g(double delta, double theta_b, double theta_t);
double weight_w(double delta, double theta_b, double theta_t);

/// Linear-interpolated percentile (p in [0, 100]) of an unsorted sample.
double percentile(std::vector<double> values, double p);

/// Fixed mode passes cfg through; adaptive mode uses the 50th / 90th
/// percentiles of the unflagged deltas (theta_t at least theta_b + 1e-6).
std::pair<double, double> pick_thresholds(const ClusterResidual& residual, const SegmentationConfig& cfg);

enum class ScoreSolver { automatic, direct, iterative };

inline constexpr std::size_t kDirectSolveLimit = 2000;

struct ScoreResult {
  std::vector<double> b;
  /// True when some entry left [0, 1] by more than 1e-12 and had to be clamped.
  bool clamped = false;
  /// max |(diag(w) + lambda L) b - w g| before clamping.
  double residual = 0.0;
  bool used_iterative = false;
};

/// Minimizer of sum w_i (b_i - g_i)^2 + lambda sum_{edges} (b_i - b_j)^2.
ScoreResult solve_scores(const std::vector<double>& delta, const AdjacencyGraph& graph, double theta_b,
                         double theta_t, double lambda_g = 1.0, ScoreSolver solver = ScoreSolver::automatic);

/// The energy minimized by solve_scores.
double score_energy(const std::vector<double>& b, const std::vector<double>& delta, const AdjacencyGraph& graph,
                    double theta_b, double theta_t, double lambda_g = 1.0);

/// Per-pixel b of the owning cluster; unlabeled pixels get 0.
ImageD pixel_scores(const ClusterSet& clusters, const std::vector<double>& b);
/// 255 where the owning cluster has b >= cutoff, else 0.
Mask dynamic_mask(const ClusterSet& clusters, const std::vector<double>& b, double cutoff);

}  // namespace flowfusion
