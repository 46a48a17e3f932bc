#include "flowfusion/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/SVD>

#include "flowfusion/dataset_io.hpp"
#include "flowfusion/error.hpp"

namespace flowfusion {

namespace {

std::vector<double> stamps(const Trajectory& t) {
  std::vector<double> s;
  s.reserve(t.size());
  for (const auto& p : t) s.push_back(p.timestamp);
  return s;
}

// Index of the timestamp nearest to `t`, or -1 when none lies within max_dt.
long nearest_index(const std::vector<double>& s, double t, double max_dt) {
  const auto it = std::lower_bound(s.begin(), s.end(), t);
  long best = -1;
  double best_d = 0.0;
  const auto consider = [&](std::vector<double>::const_iterator c) {
    const double d = std::abs(*c - t);
    if (d <= max_dt && (best < 0 || d < best_d)) {
      best = static_cast<long>(c - s.begin());
      best_d = d;
    }
  };
  if (it != s.end()) consider(it);
  if (it != s.begin()) consider(std::prev(it));
  return best;
}

}  // namespace

MetricReport summarize_errors(std::vector<double> timestamps, std::vector<double> errors) {
  MetricReport r;
  r.timestamps = std::move(timestamps);
  r.errors = std::move(errors);
  if (r.errors.empty()) return r;
  double sq = 0.0, sum = 0.0;
  for (double e : r.errors) {
    sq += e * e;
    sum += e;
    r.max = std::max(r.max, e);
  }
  const double n = static_cast<double>(r.errors.size());
  r.rmse = std::sqrt(sq / n);
  r.mean = sum / n;
  std::vector<double> sorted = r.errors;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size() / 2;
  r.median = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
  return r;
}

Alignment align_points(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size()) throw DimensionError("point sets differ in size");
  if (src.size() < 3) throw InsufficientDataError("alignment needs at least 3 associated poses");
  const double n = static_cast<double>(src.size());
  Vec3 ms = Vec3::Zero(), md = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    ms += src[i];
    md += dst[i];
  }
  ms /= n;
  md /= n;
  Mat3 H = Mat3::Zero();
  Mat3 C = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    H += (src[i] - ms) * (dst[i] - md).transpose();
    C += (src[i] - ms) * (src[i] - ms).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  Mat3 S = Mat3::Identity();
  if ((V * U.transpose()).determinant() < 0.0) S(2, 2) = -1.0;
  Alignment a;
  a.transform.R = V * S * U.transpose();
  a.transform.t = md - a.transform.R * ms;
  a.pairs = src.size();
  const Vec3 ev = Eigen::JacobiSVD<Mat3>(C).singularValues();
  a.degenerate = !(ev[0] > 0.0) || ev[1] <= 1e-10 * ev[0];
  return a;
}

Alignment align_trajectories(const Trajectory& est, const Trajectory& gt, double max_dt) {
  const auto pairs = associate_timestamps(stamps(est), stamps(gt), max_dt);
  std::vector<Vec3> src, dst;
  for (const auto& [i, j] : pairs) {
    src.push_back(est[i].pose.t);
    dst.push_back(gt[j].pose.t);
  }
  if (src.size() < 3)
    throw InsufficientDataError("alignment needs at least 3 associated poses, found " + std::to_string(src.size()));
  return align_points(src, dst);
}

AteResult compute_ate(const Trajectory& est, const Trajectory& gt, double max_dt) {
  AteResult out;
  out.alignment = align_trajectories(est, gt, max_dt);
  std::vector<double> ts, errs;
  for (const auto& [i, j] : associate_timestamps(stamps(est), stamps(gt), max_dt)) {
    ts.push_back(est[i].timestamp);
    errs.push_back((out.alignment.transform * est[i].pose.t - gt[j].pose.t).norm());
  }
  out.metrics = summarize_errors(std::move(ts), std::move(errs));
  return out;
}

MetricReport compute_rpe(const Trajectory& est, const Trajectory& gt, double delta, double max_dt) {
  if (!(delta > 0.0)) throw ParameterError("RPE interval must be positive");
  const auto es = stamps(est);
  const auto gs = stamps(gt);
  std::vector<long> gt_of(es.size(), -1);
  for (const auto& [i, j] : associate_timestamps(es, gs, max_dt)) gt_of[i] = static_cast<long>(j);

  std::vector<double> ts, errs;
  for (std::size_t i = 0; i < es.size(); ++i) {
    if (gt_of[i] < 0) continue;
    const long j = nearest_index(es, es[i] + delta, max_dt);
    if (j < 0 || static_cast<std::size_t>(j) <= i || gt_of[j] < 0) continue;
    const RigidTransform& P0 = est[i].pose;
    const RigidTransform& P1 = est[static_cast<std::size_t>(j)].pose;
    const RigidTransform& Q0 = gt[static_cast<std::size_t>(gt_of[i])].pose;
    const RigidTransform& Q1 = gt[static_cast<std::size_t>(gt_of[j])].pose;
    const RigidTransform E = (Q0.inverse() * Q1).inverse() * (P0.inverse() * P1);
    ts.push_back(es[i]);
    errs.push_back(E.t.norm() / delta);
  }
  if (errs.empty()) throw InsufficientDataError("no pose pairs separated by the RPE interval (is the trajectory shorter than delta?)");
  return summarize_errors(std::move(ts), std::move(errs));
}

void write_error_csv(const MetricReport& report, std::ostream& out) {
  const auto old = out.precision(9);
  out << "timestamp,error\n" << std::fixed;
  for (std::size_t i = 0; i < report.errors.size(); ++i) {
    out << report.timestamps[i] << ',' << report.errors[i] << '\n';
  }
  out.unsetf(std::ios::floatfield);
  out.precision(old);
}

}  // namespace flowfusion
