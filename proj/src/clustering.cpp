#include "flowfusion/clustering.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "flowfusion/error.hpp"
#include "flowfusion/kernels.hpp"

namespace flowfusion {

namespace {

using kernels::Feature;

void accumulate_stats(const Image<int>& labels, const RgbdFrame& frame, std::vector<ClusterStats>& stats) {
  const auto& K = frame.intrinsics;
  std::vector<Vec3> sum_p(stats.size(), Vec3::Zero());
  std::vector<double> sum_i(stats.size(), 0.0);
  for (auto& s : stats) s = ClusterStats{};
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const int l = labels(x, y);
      if (l < 0) continue;
      const Vec3 p = backproject({double(x), double(y)}, frame.depth(x, y), K);
      sum_p[l] += p;
      sum_i[l] += frame.intensity(x, y);
      ++stats[l].size;
    }
  }
  for (std::size_t c = 0; c < stats.size(); ++c) {
    const double n = static_cast<double>(stats[c].size);
    stats[c].centroid = sum_p[c] / n;
    stats[c].mean_depth = stats[c].centroid.z();
    stats[c].mean_intensity = sum_i[c] / n;
  }
}

}  // namespace

ClusterSet ClusterSet::from_labels(const Image<int>& labels, const RgbdFrame& frame, double seed_resolution) {
  if (!labels.same_shape(frame.depth)) throw DimensionError("label image does not match frame");
  int max_label = -1;
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const int l = labels(x, y);
      if (l >= 0 && !(frame.depth(x, y) > 0.0)) throw ParameterError("label on an invalid-depth pixel");
      max_label = std::max(max_label, l);
    }
  }
  std::vector<int> remap(static_cast<std::size_t>(max_label + 1), -1);
  for (int l : labels) {
    if (l >= 0) remap[l] = 0;
  }
  int next = 0;
  for (auto& r : remap) {
    if (r == 0) r = next++;
  }
  ClusterSet set;
  set.seed_resolution = seed_resolution;
  set.labels = Image<int>(labels.width(), labels.height(), -1);
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const int l = labels(x, y);
      set.labels(x, y) = l >= 0 ? remap[l] : -1;
    }
  }
  set.clusters.resize(static_cast<std::size_t>(next));
  accumulate_stats(set.labels, frame, set.clusters);
  return set;
}

ClusterSet cluster_frame(const RgbdFrame& frame, const PinholeIntrinsics& K, const ClusteringParams& params,
                         Execution exec) {
  if (!(params.seed_resolution > 0.0)) throw ParameterError("seed_resolution must be positive");
  if (params.max_kmeans_iters < 1) throw ParameterError("max_kmeans_iters must be >= 1");
  const int w = frame.width();
  const int h = frame.height();

  std::vector<Feature> points;
  std::vector<std::size_t> pixel_of;
  points.reserve(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double z = frame.depth(x, y);
      if (!(z > 0.0)) continue;
      const Vec3 p = backproject({double(x), double(y)}, z, K);
      points.push_back({p.x(), p.y(), p.z(), frame.intensity(x, y)});
      pixel_of.push_back(static_cast<std::size_t>(y) * w + x);
    }
  }
  if (points.empty()) throw EmptyCloudError("frame has no valid depth");

  // seeds: mean feature of each occupied grid voxel, in voxel-key order
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  for (const auto& p : points) lo = lo.cwiseMin(Vec3(p.x, p.y, p.z));
  std::map<std::array<long, 3>, std::pair<Feature, std::size_t>> voxels;
  for (const auto& p : points) {
    const std::array<long, 3> key{static_cast<long>(std::floor((p.z - lo.z()) / params.seed_resolution)),
                                  static_cast<long>(std::floor((p.y - lo.y()) / params.seed_resolution)),
                                  static_cast<long>(std::floor((p.x - lo.x()) / params.seed_resolution))};
    auto& [acc, n] = voxels[key];
    acc.x += p.x;
    acc.y += p.y;
    acc.z += p.z;
    acc.intensity += p.intensity;
    ++n;
  }
  std::vector<Feature> centers;
  centers.reserve(voxels.size());
  for (const auto& [key, v] : voxels) {
    const double n = static_cast<double>(v.second);
    centers.push_back({v.first.x / n, v.first.y / n, v.first.z / n, v.first.intensity / n});
  }

  const kernels::FeatureWeights fw{params.spatial_weight, params.intensity_weight};
  std::vector<int> assign(points.size(), -1);
  std::vector<double> dist(points.size(), 0.0);
  ClusterSet set;
  set.seed_resolution = params.seed_resolution;
  for (int it = 0; it < params.max_kmeans_iters; ++it) {
    const std::size_t changed = exec == Execution::parallel
                                    ? kernels::assign_nearest(points, centers, fw, assign, dist)
                                    : kernels::serial::assign_nearest(points, centers, fw, assign, dist);
    set.cost_history.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
    if (changed == 0) break;
    std::vector<Feature> sums(centers.size());
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& s = sums[assign[i]];
      s.x += points[i].x;
      s.y += points[i].y;
      s.z += points[i].z;
      s.intensity += points[i].intensity;
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (counts[c] == 0) continue;  // empty centers stay put and are dropped at the end
      const double n = static_cast<double>(counts[c]);
      centers[c] = {sums[c].x / n, sums[c].y / n, sums[c].z / n, sums[c].intensity / n};
    }
  }

  Image<int> labels(w, h, -1);
  for (std::size_t i = 0; i < points.size(); ++i) labels[pixel_of[i]] = assign[i];
  ClusterSet compact = ClusterSet::from_labels(labels, frame, params.seed_resolution);
  compact.cost_history = std::move(set.cost_history);
  return compact;
}

void AdjacencyGraph::add_edge(int i, int j) {
  if (i == j) return;
  if (i > j) std::swap(i, j);
  if (connected(i, j)) return;
  neighbors_[i].insert(std::lower_bound(neighbors_[i].begin(), neighbors_[i].end(), j), j);
  neighbors_[j].insert(std::lower_bound(neighbors_[j].begin(), neighbors_[j].end(), i), i);
  const std::pair<int, int> e{i, j};
  edges_.insert(std::lower_bound(edges_.begin(), edges_.end(), e), e);
}

bool AdjacencyGraph::connected(int i, int j) const {
  if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= neighbors_.size() ||
      static_cast<std::size_t>(j) >= neighbors_.size())
    return false;
  const auto& n = neighbors_[i];
  return std::binary_search(n.begin(), n.end(), j);
}

AdjacencyGraph build_adjacency(const ClusterSet& clusters) {
  AdjacencyGraph g(clusters.count());
  const double max_dist = 2.0 * clusters.seed_resolution;
  const auto& L = clusters.labels;
  auto consider = [&](int a, int b) {
    if (a < 0 || b < 0 || a == b || g.connected(a, b)) return;
    if ((clusters.clusters[a].centroid - clusters.clusters[b].centroid).norm() < max_dist) g.add_edge(a, b);
  };
  for (int y = 0; y < L.height(); ++y) {
    for (int x = 0; x < L.width(); ++x) {
      if (x + 1 < L.width()) consider(L(x, y), L(x + 1, y));
      if (y + 1 < L.height()) consider(L(x, y), L(x, y + 1));
    }
  }
  return g;
}

}  // namespace flowfusion
