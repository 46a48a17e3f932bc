#pragma once

#include <iosfwd>
#include <vector>

#include "flowfusion/trajectory.hpp"

namespace flowfusion {

struct MetricReport {
  double rmse = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  std::vector<double> timestamps;
  std::vector<double> errors;

  std::size_t count() const { return errors.size(); }
};

/// Summary statistics of an error series.
MetricReport summarize_errors(std::vector<double> timestamps, std::vector<double> errors);

struct Alignment {
  /// Maps estimated positions onto ground truth: T * p_est ~ p_gt.
  RigidTransform transform;
  std::size_t pairs = 0;
  /// Positions nearly collinear; the rotation about that line is arbitrary.
  bool degenerate = false;
};

inline constexpr double kDefaultRpeDelta = 1.0;

/// Closed-form least-squares rigid fit (no scale) on timestamp-associated
/// positions. Throws InsufficientDataError with fewer than 3 pairs.
Alignment align_trajectories(const Trajectory& est, const Trajectory& gt, double max_dt = 0.02);

/// Rigid fit of raw point pairs; exposed for testing.
Alignment align_points(const std::vector<Vec3>& source, const std::vector<Vec3>& target);

struct AteResult {
  MetricReport metrics;
  Alignment alignment;
};

AteResult compute_ate(const Trajectory& est, const Trajectory& gt, double max_dt = 0.02);

/// Translational relative pose error in m/s over the nominal interval delta.
/// Throws InsufficientDataError when no (t, t + delta) pair exists in both.
MetricReport compute_rpe(const Trajectory& est, const Trajectory& gt, double delta = kDefaultRpeDelta,
                         double max_dt = 0.02);

/// "timestamp,error" rows.
void write_error_csv(const MetricReport& report, std::ostream& out);

}  // namespace flowfusion
