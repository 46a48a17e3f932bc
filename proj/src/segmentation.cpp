#include "flowfusion/segmentation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "flowfusion/error.hpp"

namespace flowfusion {

namespace {

void check_thresholds(double theta_b, double theta_t) {
  if (!(theta_b < theta_t)) throw ParameterError("theta_b must be below theta_t");
}

}  // namespace

void SegmentationConfig::validate() const {
  if (!(alpha_i > 0.0)) throw ParameterError("alpha_i must be positive");
  if (!(alpha_f > 0.0)) throw ParameterError("alpha_f must be positive");
  if (mode == ThresholdMode::fixed) check_thresholds(theta_b, theta_t);
  if (!(static_cutoff >= 0.0 && static_cutoff <= 1.0)) throw ParameterError("static_cutoff must be in [0, 1]");
  if (!(lambda_g >= 0.0)) throw ParameterError("lambda_g must be >= 0");
}

ClusterResidual aggregate_cluster_residuals(const ClusterSet& clusters, const ResidualImages& res,
                                            const FlowResidualField& fr, const SegmentationConfig& cfg) {
  const auto& L = clusters.labels;
  if (!L.same_shape(res.r_i) || !L.same_shape(res.r_d) || !L.same_shape(fr.magnitude))
    throw DimensionError("residual images do not match the cluster labels");
  const std::size_t n = clusters.count();
  ClusterResidual out{std::vector<double>(n, 0.0), std::vector<std::size_t>(n, 0), std::vector<unsigned char>(n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    if (!(clusters.clusters[i].mean_depth > 0.0)) throw ParameterError("cluster with non-positive depth");
  }
  for (int y = 0; y < L.height(); ++y) {
    for (int x = 0; x < L.width(); ++x) {
      const int l = L(x, y);
      if (l < 0 || !res.valid(x, y) || !fr.valid(x, y)) continue;
      const double D = clusters.clusters[l].mean_depth;
      out.delta[l] += cfg.alpha_i * std::abs(res.r_i(x, y)) + std::abs(res.r_d(x, y)) / D +
                      cfg.alpha_f * fr.magnitude(x, y);
      ++out.valid_count[l];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (out.valid_count[i] == 0) {
      out.flagged[i] = 1;
    } else {
      out.delta[i] /= static_cast<double>(out.valid_count[i]);
    }
  }
  return out;
}

double assignment_g(double delta, double theta_b, double theta_t) {
  check_thresholds(theta_b, theta_t);
  if (delta <= theta_b) return 0.0;
  if (delta >= theta_t) return 1.0;
  return (delta - theta_b) / (theta_t - theta_b);
}

double weight_w(double delta, double theta_b, double theta_t) {
  check_thresholds(theta_b, theta_t);
  const double q = (delta - theta_b) / (theta_t - theta_b);
  return std::sqrt(q * q + 1.0);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw DegenerateInputError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::pair<double, double> pick_thresholds(const ClusterResidual& residual, const SegmentationConfig& cfg) {
  if (cfg.mode == ThresholdMode::fixed) {
    check_thresholds(cfg.theta_b, cfg.theta_t);
    return {cfg.theta_b, cfg.theta_t};
  }
  std::vector<double> d;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    if (!residual.flagged[i]) d.push_back(residual.delta[i]);
  }
  if (d.size() < 2) throw DegenerateInputError("adaptive thresholds need at least 2 clusters with valid residuals");
  const double tb = percentile(d, 50.0);
  const double tt = std::max(percentile(d, 90.0), tb + 1e-6);
  return {tb, tt};
}

ScoreResult solve_scores(const std::vector<double>& delta, const AdjacencyGraph& graph, double theta_b,
                         double theta_t, double lambda_g, ScoreSolver solver) {
  check_thresholds(theta_b, theta_t);
  const std::size_t n = delta.size();
  if (graph.node_count() != n) throw DimensionError("graph and residual vector differ in size");
  if (!(lambda_g >= 0.0)) throw ParameterError("lambda_g must be >= 0");
  ScoreResult out;
  if (n == 0) return out;

  Eigen::VectorXd diag(n), rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weight_w(delta[i], theta_b, theta_t);
    diag[i] = w;
    rhs[i] = w * assignment_g(delta[i], theta_b, theta_t);
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n + 4 * graph.edge_count());
  for (const auto& [i, j] : graph.edges()) {
    diag[i] += lambda_g;
    diag[j] += lambda_g;
    trip.emplace_back(i, j, -lambda_g);
    trip.emplace_back(j, i, -lambda_g);
  }
  for (std::size_t i = 0; i < n; ++i) trip.emplace_back(i, i, diag[i]);
  const auto sn = static_cast<Eigen::Index>(n);
  Eigen::SparseMatrix<double> A(sn, sn);
  A.setFromTriplets(trip.begin(), trip.end());

  const bool iterative =
      solver == ScoreSolver::iterative || (solver == ScoreSolver::automatic && n >= kDirectSolveLimit);
  Eigen::VectorXd b;
  if (iterative) {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-10);
    cg.setMaxIterations(std::max<Eigen::Index>(1000, 10 * sn));
    cg.compute(A);
    b = cg.solve(rhs);
    if (cg.info() != Eigen::Success) throw InternalError("conjugate gradients did not converge");
  } else {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw InternalError("score system is singular");
    b = ldlt.solve(rhs);
  }
  if (!b.allFinite()) throw InternalError("non-finite scores");
  out.used_iterative = iterative;
  out.residual = (A * b - rhs).cwiseAbs().maxCoeff();
  out.b.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[static_cast<Eigen::Index>(i)];
    if (v < 0.0 || v > 1.0) {
      if (v < -1e-12 || v > 1.0 + 1e-12) out.clamped = true;
      v = std::clamp(v, 0.0, 1.0);
    }
    out.b[i] = v;
  }
  return out;
}

double score_energy(const std::vector<double>& b, const std::vector<double>& delta, const AdjacencyGraph& graph,
                    double theta_b, double theta_t, double lambda_g) {
  if (b.size() != delta.size() || graph.node_count() != delta.size())
    throw DimensionError("score, residual and graph sizes differ");
  double e = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double d = b[i] - assignment_g(delta[i], theta_b, theta_t);
    e += weight_w(delta[i], theta_b, theta_t) * d * d;
  }
  for (const auto& [i, j] : graph.edges()) {
    const double d = b[i] - b[j];
    e += lambda_g * d * d;
  }
  return e;
}

ImageD pixel_scores(const ClusterSet& clusters, const std::vector<double>& b) {
  if (b.size() != clusters.count()) throw DimensionError("score vector size differs from cluster count");
  const auto& L = clusters.labels;
  ImageD out(L.width(), L.height());
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (L[i] >= 0) out[i] = b[static_cast<std::size_t>(L[i])];
  }
  return out;
}

Mask dynamic_mask(const ClusterSet& clusters, const std::vector<double>& b, double cutoff) {
  const ImageD s = pixel_scores(clusters, b);
  Mask m(s.width(), s.height(), 0);
  const auto& L = clusters.labels;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (L[i] >= 0 && s[i] >= cutoff) m[i] = 255;
  }
  return m;
}

}  // namespace flowfusion
