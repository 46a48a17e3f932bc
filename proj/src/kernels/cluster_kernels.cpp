#include <cstdint>

#include "flowfusion/kernels.hpp"

namespace flowfusion::kernels {

namespace {

inline int nearest(const Feature& p, std::span<const Feature> centers, const FeatureWeights& w, double& best) {
  int best_id = 0;
  best = feature_distance(p, centers[0], w);
  for (std::size_t c = 1; c < centers.size(); ++c) {
    const double d = feature_distance(p, centers[c], w);
    if (d < best) {  // strict: ties stay with the lower id
      best = d;
      best_id = static_cast<int>(c);
    }
  }
  return best_id;
}

}  // namespace

std::size_t assign_nearest(std::span<const Feature> points, std::span<const Feature> centers,
                           const FeatureWeights& w, std::span<int> labels, std::span<double> dist) {
  const auto n = static_cast<std::int64_t>(points.size());
  std::size_t changed = 0;
#pragma omp parallel for schedule(static) reduction(+ : changed)
  for (std::int64_t i = 0; i < n; ++i) {
    double d;
    const int id = nearest(points[i], centers, w, d);
    if (labels[i] != id) ++changed;
    labels[i] = id;
    dist[i] = d;
  }
  return changed;
}

namespace serial {

std::size_t assign_nearest(std::span<const Feature> points, std::span<const Feature> centers,
                           const FeatureWeights& w, std::span<int> labels, std::span<double> dist) {
  std::size_t changed = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    int best_id = -1;
    double best = 0.0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double d = feature_distance(points[i], centers[c], w);
      if (best_id < 0 || d < best) {
        best = d;
        best_id = static_cast<int>(c);
      }
    }
    if (labels[i] != best_id) ++changed;
    labels[i] = best_id;
    dist[i] = best;
  }
  return changed;
}

}  // namespace serial

}  // namespace flowfusion::kernels
