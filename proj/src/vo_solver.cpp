#include "flowfusion/vo_solver.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Cholesky>

#include "flowfusion/error.hpp"
#include "flowfusion/kernels.hpp"

namespace flowfusion {

namespace {

double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double hi = *mid;
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

ImageD normalized_depth_weights(const ImageD& depth, double sigma0, double sigma1) {
  ImageD w = raw_depth_weights(depth, sigma0, sigma1);
  std::vector<double> vals;
  vals.reserve(w.size());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (depth[i] > 0.0) vals.push_back(w[i]);
  }
  if (vals.empty()) return w;
  const double med = median_inplace(vals);
  for (auto& x : w) x /= med;
  return w;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(alpha_i > 0.0)) throw ParameterError("alpha_i must be positive");
  if (pyramid_levels < 1) throw ParameterError("pyramid_levels must be >= 1");
  if (iters_per_level < 1) throw ParameterError("iters_per_level must be >= 1");
  if (!(cauchy_k > 0.0)) throw ParameterError("cauchy_k must be positive");
  if (!(convergence_eps >= 0.0)) throw ParameterError("convergence_eps must be >= 0");
  if (!(damping >= 0.0)) throw ParameterError("damping must be >= 0");
  if (max_halvings < 0) throw ParameterError("max_halvings must be >= 0");
  if (!(sigma0 >= 0.0) || !(sigma1 >= 0.0) || !(sigma0 + sigma1 > 0.0))
    throw ParameterError("sigma0/sigma1 must be non-negative and not both zero");
}

double cauchy_penalty(double r, double c) {
  if (!(c > 0.0)) throw ParameterError("cauchy scale must be positive");
  const double q = r / c;
  return 0.5 * c * c * std::log1p(q * q);
}

double cauchy_weight(double r, double c) {
  if (!(c > 0.0)) throw ParameterError("cauchy scale must be positive");
  const double q = r / c;
  return 1.0 / (1.0 + q * q);
}

double estimate_scale_c(std::span<const double> residuals, double k, std::size_t min_count) {
  if (residuals.size() < std::max<std::size_t>(1, min_count))
    throw DegenerateInputError("too few residuals for a scale estimate (" + std::to_string(residuals.size()) + ")");
  std::vector<double> v(residuals.begin(), residuals.end());
  const double med = median_inplace(v);
  for (auto& x : v) x = std::abs(x - med);
  const double mad = median_inplace(v);
  return std::max(k * 1.4826 * mad, kScaleFloor);
}

ImageD raw_depth_weights(const ImageD& depth, double sigma0, double sigma1) {
  ImageD w(depth.width(), depth.height());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double z = depth[i];
    if (z > 0.0) w[i] = 1.0 / (sigma0 + sigma1 * z * z);
  }
  return w;
}

PixelWeights compute_pixel_weights(const RgbdFrame& frame, double sigma0, double sigma1) {
  return {ImageD(frame.width(), frame.height(), 1.0), normalized_depth_weights(frame.depth, sigma0, sigma1)};
}

FramePyramid build_pyramid(const RgbdFrame& frame, int levels) {
  if (levels < 1) throw ParameterError("pyramid levels must be >= 1");
  FramePyramid p;
  p.intensity.push_back(frame.intensity);
  p.depth.push_back(frame.depth);
  p.intrinsics.push_back(frame.intrinsics);
  for (int l = 1; l < levels; ++l) {
    if (p.intensity.back().width() < 2 || p.intensity.back().height() < 2)
      throw ParameterError("image too small for " + std::to_string(levels) + " pyramid levels");
    p.intensity.push_back(downsample_average(p.intensity.back()));
    p.depth.push_back(downsample_depth_median(p.depth.back()));
    p.intrinsics.push_back(p.intrinsics.back().downsampled());
  }
  return p;
}

ImageD static_weight_image(const ClusterScoreView& view, int width, int height, int level) {
  const auto& labels = view.clusters->labels;
  ImageD m(width, height, 1.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int fx = x << level, fy = y << level;
      if (!labels.in_bounds(fx, fy)) continue;
      const int l = labels(fx, fy);
      if (l >= 0) m(x, y) = 1.0 - view.scores[static_cast<std::size_t>(l)];
    }
  }
  return m;
}

const char* to_string(VoStatus s) {
  switch (s) {
    case VoStatus::ok:
      return "ok";
    case VoStatus::under_constrained:
      return "under_constrained";
    case VoStatus::numerical_failure:
      return "numerical_failure";
  }
  return "unknown";
}

ResidualImages compute_residuals(const RgbdFrame& a, const RgbdFrame& b, const Twist& xi, Execution exec) {
  if (!a.intensity.same_shape(b.intensity) || !a.depth.same_shape(b.depth))
    throw DimensionError("frames differ in size");
  kernels::VoLevel L;
  L.intensity_a = &a.intensity;
  L.depth_a = &a.depth;
  L.intensity_b = &b.intensity;
  L.depth_b = &b.depth;
  L.K = a.intrinsics;
  ResidualImages out{ImageD(a.width(), a.height()), ImageD(a.width(), a.height()), Mask(a.width(), a.height(), 0)};
  const RigidTransform T = se3_exp(xi);
  if (exec == Execution::parallel)
    kernels::residual_images(L, T, out.r_i, out.r_d, out.valid);
  else
    kernels::serial::residual_images(L, T, out.r_i, out.r_d, out.valid);
  return out;
}

VoResult solve_vo(const RgbdFrame& a, const RgbdFrame& b, const SolverConfig& config, const Twist& xi0,
                  std::optional<ClusterScoreView> scores, Execution exec) {
  config.validate();
  if (!a.intensity.same_shape(b.intensity) || !a.depth.same_shape(b.depth))
    throw DimensionError("frames differ in size");
  if (!xi0.is_finite()) throw ParameterError("initial twist is not finite");
  if (scores) {
    if (!scores->clusters) throw ParameterError("cluster scores without clusters");
    if (!scores->clusters->labels.same_shape(a.depth)) throw DimensionError("cluster labels do not match frame A");
    if (scores->scores.size() != scores->clusters->count())
      throw DimensionError("score vector size differs from cluster count");
  }
  const auto accumulate = [exec](const kernels::VoLevel& L, const RigidTransform& T, double ci, double cd, bool sys) {
    return exec == Execution::parallel ? kernels::accumulate_vo(L, T, ci, cd, sys)
                                       : kernels::serial::accumulate_vo(L, T, ci, cd, sys);
  };

  const FramePyramid pa = build_pyramid(a, config.pyramid_levels);
  const FramePyramid pb = build_pyramid(b, config.pyramid_levels);

  VoResult result;
  result.xi = xi0;
  RigidTransform T = se3_exp(xi0);
  const auto fail = [&](VoStatus status, std::string msg) {
    result.status = status;
    result.message = std::move(msg);
    result.xi = xi0;
    return result;
  };

  for (int level = config.pyramid_levels - 1; level >= 0; --level) {
    const int w = pa.intensity[level].width();
    const int h = pa.intensity[level].height();
    const ImageD wd = normalized_depth_weights(pa.depth[level], config.sigma0, config.sigma1);
    std::optional<ImageD> m;
    if (scores) m = static_weight_image(*scores, w, h, level);

    kernels::VoLevel L;
    L.intensity_a = &pa.intensity[level];
    L.depth_a = &pa.depth[level];
    L.intensity_b = &pb.intensity[level];
    L.depth_b = &pb.depth[level];
    L.depth_weight = &wd;
    L.static_weight = m ? &*m : nullptr;
    L.K = pa.intrinsics[level];
    L.alpha_i = config.alpha_i;

    // robust scales from the residuals at the current estimate
    ImageD ri(w, h), rd(w, h);
    Mask valid(w, h, 0);
    if (exec == Execution::parallel)
      kernels::residual_images(L, T, ri, rd, valid);
    else
      kernels::serial::residual_images(L, T, ri, rd, valid);
    std::vector<double> si, sd;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!valid(x, y) || (m && !((*m)(x, y) > 0.0))) continue;
        si.push_back(config.alpha_i * ri(x, y));
        sd.push_back(wd(x, y) * rd(x, y));
      }
    }
    if (si.size() < config.min_valid_pixels) {
      return fail(VoStatus::under_constrained, "level " + std::to_string(level) + " has " +
                                                   std::to_string(si.size()) + " valid pixels, need " +
                                                   std::to_string(config.min_valid_pixels));
    }
    const double c_i = estimate_scale_c(si, config.cauchy_k);
    const double c_d = estimate_scale_c(sd, config.cauchy_k);

    for (int it = 0; it < config.iters_per_level; ++it) {
      const kernels::NormalEquations ne = accumulate(L, T, c_i, c_d, true);
      if (ne.count < config.min_valid_pixels) {
        return fail(VoStatus::under_constrained, "level " + std::to_string(level) + " lost its valid pixels");
      }
      if (!ne.H.allFinite() || !ne.g.allFinite() || !std::isfinite(ne.energy)) {
        return fail(VoStatus::numerical_failure, "non-finite normal equations");
      }
      const Mat6 A = ne.H + config.damping * Mat6::Identity();
      Vec6 delta = A.ldlt().solve(-ne.g);
      if (!delta.allFinite()) return fail(VoStatus::numerical_failure, "non-finite step");

      VoIterationRecord rec;
      rec.level = level;
      rec.iteration = it;
      rec.energy_before = ne.energy;
      rec.c_i = c_i;
      rec.c_d = c_d;
      rec.valid_pixels = ne.count;

      RigidTransform candidate = se3_exp(Twist::from_vector(delta)) * T;
      double e = accumulate(L, candidate, c_i, c_d, false).energy;
      while (e > ne.energy && rec.halvings < config.max_halvings) {
        delta *= 0.5;
        ++rec.halvings;
        candidate = se3_exp(Twist::from_vector(delta)) * T;
        e = accumulate(L, candidate, c_i, c_d, false).energy;
      }
      if (e > ne.energy || !std::isfinite(e)) {
        rec.energy = ne.energy;
        result.iterations.push_back(rec);
        break;
      }
      T = candidate;
      rec.accepted = true;
      rec.energy = e;
      rec.step_norm = delta.norm();
      result.iterations.push_back(rec);
      if (rec.step_norm < config.convergence_eps) break;
    }
  }
  result.xi = se3_log(T);
  if (!result.xi.is_finite()) return fail(VoStatus::numerical_failure, "non-finite pose");
  return result;
}

void write_vo_diagnostics_csv(const std::vector<VoIterationRecord>& records, std::ostream& out, bool header) {
  if (header) out << "level,iteration,energy_before,energy,step_norm,halvings,accepted,c_i,c_d,valid_pixels\n";
  const auto old_prec = out.precision(12);
  for (const auto& r : records) {
    out << r.level << ',' << r.iteration << ',' << r.energy_before << ',' << r.energy << ',' << r.step_norm << ','
        << r.halvings << ',' << (r.accepted ? 1 : 0) << ',' << r.c_i << ',' << r.c_d << ',' << r.valid_pixels << '\n';
  }
  out.precision(old_prec);
}

}  // namespace flowfusion
