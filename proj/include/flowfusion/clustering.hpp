#pragma once

#include <utility>
#include <vector>

#include "flowfusion/frame.hpp"
#include "flowfusion/parallel.hpp"

namespace flowfusion {

struct ClusteringParams {
  /// Pitch of the 3D seed grid (m).
  double seed_resolution = 0.3;
  double spatial_weight = 1.0;
  double intensity_weight = 0.5;
  int max_kmeans_iters = 10;
};

struct ClusterStats {
  std::size_t size = 0;
  Vec3 centroid = Vec3::Zero();
  double mean_depth = 0.0;
  double mean_intensity = 0.0;
};

/// Over-segmentation of one frame. Labels are -1 for invalid-depth pixels and
/// 0..count()-1 otherwise.
struct ClusterSet {
  Image<int> labels;
  std::vector<ClusterStats> clusters;
  double seed_resolution = 0.3;
  /// Total assignment cost after each k-means assignment step.
  std::vector<double> cost_history;

  std::size_t count() const { return clusters.size(); }

  /// Builds a set from an arbitrary label image (negative = unlabeled). Empty
  /// ids are dropped and the rest renumbered in increasing order. Labels on
  /// invalid-depth pixels are rejected with ParameterError.
  static ClusterSet from_labels(const Image<int>& labels, const RgbdFrame& frame, double seed_resolution);
};

/// Symmetric, irreflexive adjacency between cluster ids.
class AdjacencyGraph {
 public:
  AdjacencyGraph() = default;
  explicit AdjacencyGraph(std::size_t node_count) : neighbors_(node_count) {}

  /// Adds the undirected edge {i, j}; self-edges and duplicates are ignored.
  void add_edge(int i, int j);
  bool connected(int i, int j) const;
  std::size_t node_count() const { return neighbors_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  /// Edges (i, j) with i < j in lexicographic order.
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }

 private:
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::pair<int, int>> edges_;
};

/// Grid-seeded k-means over (x, y, z, intensity) of frame A's valid pixels.
/// Throws EmptyCloudError when the frame has no valid depth.
ClusterSet cluster_frame(const RgbdFrame& frame, const PinholeIntrinsics& K, const ClusteringParams& params,
                         Execution exec = Execution::parallel);

/// Clusters i, j are adjacent iff they own a 4-neighbor pixel pair and their
/// centroids are closer than 2 * seed_resolution.
AdjacencyGraph build_adjacency(const ClusterSet& clusters);

}  // namespace flowfusion
