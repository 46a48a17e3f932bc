#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "flowfusion/segmentation.hpp"

namespace fftest {

using namespace flowfusion;

/// Exhaustive grid search of the score energy over [0,1]^n, coarse to fine:
/// a full 0.05 grid, then +-5-cell boxes around the incumbent at 0.01 and
/// 0.001, rescanned until the incumbent stops moving. The energy is a convex
/// quadratic, so the refinement cannot lose the basin.
inline std::vector<double> grid_minimize_scores(const std::vector<double>& delta, const AdjacencyGraph& graph,
                                                double theta_b, double theta_t) {
  const std::size_t n = delta.size();
  std::vector<double> best(n, 0.0);
  double best_e = score_energy(best, delta, graph, theta_b, theta_t);

  const auto scan = [&](const std::vector<double>& center, double step, int half) {
    std::vector<int> idx(n, -half);
    std::vector<double> b(n);
    const std::vector<double> c = center;
    while (true) {
      bool inside = true;
      for (std::size_t i = 0; i < n; ++i) {
        b[i] = std::round((c[i] + idx[i] * step) * 1e6) / 1e6;
        if (b[i] < 0.0 || b[i] > 1.0) inside = false;
      }
      if (inside) {
        const double e = score_energy(b, delta, graph, theta_b, theta_t);
        if (e < best_e) {
          best_e = e;
          best = b;
        }
      }
      std::size_t k = 0;
      while (k < n && ++idx[k] > half) idx[k++] = -half;
      if (k == n) break;
    }
  };
  scan(std::vector<double>(n, 0.5), 0.05, 10);
  for (double step : {0.01, 0.001}) {
    std::vector<double> prev;
    while (prev != best) {
      prev = best;
      scan(best, step, 5);
    }
  }
  return best;
}

}  // namespace fftest
