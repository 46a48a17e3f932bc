#include "flowfusion/pipeline.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "flowfusion/error.hpp"

namespace flowfusion {

void PipelineConfig::validate() const {
  solver.validate();
  segmentation.validate();
  if (!(clustering.seed_resolution > 0.0)) throw ParameterError("clustering.seed_resolution must be positive");
  if (max_outer_iterations < 1) throw ParameterError("pipeline.max_outer_iterations must be >= 1");
  if (!(pose_eps >= 0.0) || !(score_eps >= 0.0)) throw ParameterError("convergence tolerances must be >= 0");
  if (!(map_voxel_size > 0.0)) throw ParameterError("map.voxel_size must be positive");
}

PipelineConfig pipeline_config_from(const KeyValueConfig& kv) {
  PipelineConfig c;
  auto& s = c.solver;
  s.alpha_i = kv.get_double("solver.alpha_i", s.alpha_i);
  s.pyramid_levels = kv.get_int("solver.pyramid_levels", s.pyramid_levels);
  s.iters_per_level = kv.get_int("solver.iters_per_level", s.iters_per_level);
  s.cauchy_k = kv.get_double("solver.cauchy_k", s.cauchy_k);
  s.convergence_eps = kv.get_double("solver.convergence_eps", s.convergence_eps);
  const int min_valid = kv.get_int("solver.min_valid_pixels", static_cast<int>(s.min_valid_pixels));
  if (min_valid < 0) throw ConfigError("solver.min_valid_pixels must be >= 0", kv.line_of("solver.min_valid_pixels"));
  s.min_valid_pixels = static_cast<std::size_t>(min_valid);
  s.damping = kv.get_double("solver.damping", s.damping);
  s.max_halvings = kv.get_int("solver.max_halvings", s.max_halvings);
  s.sigma0 = kv.get_double("solver.sigma0", s.sigma0);
  s.sigma1 = kv.get_double("solver.sigma1", s.sigma1);

  auto& g = c.segmentation;
  g.alpha_i = s.alpha_i;  // one alpha_I for both the VO and the cluster residual
  g.alpha_f = kv.get_double("segmentation.alpha_f", g.alpha_f);
  const std::string mode = kv.get_string("segmentation.thresholds", "fixed");
  if (mode == "fixed") {
    g.mode = ThresholdMode::fixed;
  } else if (mode == "adaptive") {
    g.mode = ThresholdMode::adaptive;
  } else {
    throw ConfigError("segmentation.thresholds must be fixed or adaptive", kv.line_of("segmentation.thresholds"));
  }
  g.theta_b = kv.get_double("segmentation.theta_b", g.theta_b);
  g.theta_t = kv.get_double("segmentation.theta_t", g.theta_t);
  g.static_cutoff = kv.get_double("segmentation.static_cutoff", g.static_cutoff);
  g.lambda_g = kv.get_double("segmentation.lambda_g", g.lambda_g);
  c.segmentation_enabled = kv.get_bool("segmentation.enabled", c.segmentation_enabled);

  auto& k = c.clustering;
  k.seed_resolution = kv.get_double("clustering.seed_resolution", k.seed_resolution);
  k.spatial_weight = kv.get_double("clustering.spatial_weight", k.spatial_weight);
  k.intensity_weight = kv.get_double("clustering.intensity_weight", k.intensity_weight);
  k.max_kmeans_iters = kv.get_int("clustering.max_kmeans_iters", k.max_kmeans_iters);

  c.flow_source = kv.get_string("flow.provider", c.flow_source);
  PyramidalLkFlow lk;
  lk.levels = kv.get_int("flow.levels", lk.levels);
  lk.window = kv.get_int("flow.window", lk.window);
  lk.iterations = kv.get_int("flow.iterations", lk.iterations);
  lk.min_eigenvalue = kv.get_double("flow.min_eigenvalue", lk.min_eigenvalue);
  c.flow = lk;

  c.max_outer_iterations = kv.get_int("pipeline.max_outer_iterations", c.max_outer_iterations);
  c.pose_eps = kv.get_double("pipeline.pose_eps", c.pose_eps);
  c.score_eps = kv.get_double("pipeline.score_eps", c.score_eps);
  c.map_voxel_size = kv.get_double("map.voxel_size", c.map_voxel_size);

  for (const auto& key : kv.unused_keys()) {
    for (const char* section : {"solver.", "segmentation.", "clustering.", "flow.", "pipeline.", "map."}) {
      if (key.rfind(section, 0) == 0) throw ConfigError("unknown key " + key, kv.line_of(key));
    }
  }
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::string describe_config(const PipelineConfig& c) {
  KeyValueConfig kv;
  auto num = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  kv.set("solver.alpha_i", num(c.solver.alpha_i));
  kv.set("solver.pyramid_levels", std::to_string(c.solver.pyramid_levels));
  kv.set("solver.iters_per_level", std::to_string(c.solver.iters_per_level));
  kv.set("solver.cauchy_k", num(c.solver.cauchy_k));
  kv.set("solver.convergence_eps", num(c.solver.convergence_eps));
  kv.set("solver.min_valid_pixels", std::to_string(c.solver.min_valid_pixels));
  kv.set("solver.damping", num(c.solver.damping));
  kv.set("solver.max_halvings", std::to_string(c.solver.max_halvings));
  kv.set("solver.sigma0", num(c.solver.sigma0));
  kv.set("solver.sigma1", num(c.solver.sigma1));
  kv.set("segmentation.enabled", c.segmentation_enabled ? "true" : "false");
  kv.set("segmentation.alpha_f", num(c.segmentation.alpha_f));
  kv.set("segmentation.thresholds", c.segmentation.mode == ThresholdMode::fixed ? "fixed" : "adaptive");
  kv.set("segmentation.theta_b", num(c.segmentation.theta_b));
  kv.set("segmentation.theta_t", num(c.segmentation.theta_t));
  kv.set("segmentation.static_cutoff", num(c.segmentation.static_cutoff));
  kv.set("segmentation.lambda_g", num(c.segmentation.lambda_g));
  kv.set("clustering.seed_resolution", num(c.clustering.seed_resolution));
  kv.set("clustering.spatial_weight", num(c.clustering.spatial_weight));
  kv.set("clustering.intensity_weight", num(c.clustering.intensity_weight));
  kv.set("clustering.max_kmeans_iters", std::to_string(c.clustering.max_kmeans_iters));
  kv.set("flow.provider", c.flow_source);
  if (const auto* lk = std::get_if<PyramidalLkFlow>(&c.flow)) {
    kv.set("flow.levels", std::to_string(lk->levels));
    kv.set("flow.window", std::to_string(lk->window));
    kv.set("flow.iterations", std::to_string(lk->iterations));
    kv.set("flow.min_eigenvalue", num(lk->min_eigenvalue));
  }
  kv.set("pipeline.max_outer_iterations", std::to_string(c.max_outer_iterations));
  kv.set("pipeline.pose_eps", num(c.pose_eps));
  kv.set("pipeline.score_eps", num(c.score_eps));
  kv.set("map.voxel_size", num(c.map_voxel_size));
  return kv.dump();
}

namespace {

void finish_scores(FramePairResult& r, const PipelineConfig& cfg) {
  r.mask = r.clusters.labels.empty() ? Mask() : dynamic_mask(r.clusters, r.b, cfg.segmentation.static_cutoff);
}

OuterIterationRecord score_stats(const std::vector<double>& b, double cutoff) {
  OuterIterationRecord rec;
  double sum = 0.0;
  for (double v : b) {
    rec.max_b = std::max(rec.max_b, v);
    sum += v;
    if (v >= cutoff) ++rec.dynamic_clusters;
  }
  rec.mean_b = b.empty() ? 0.0 : sum / static_cast<double>(b.size());
  return rec;
}

}  // namespace

FramePairResult process_pair(const RgbdFrame& a, const RgbdFrame& b, const PipelineConfig& cfg,
                             const Twist& xi_prior, Execution exec) {
  cfg.validate();
  if (!a.intensity.same_shape(b.intensity) || !a.depth.same_shape(b.depth))
    throw DimensionError("frames differ in size");
  if (!(a.intrinsics == b.intrinsics)) throw ParameterError("frames must share intrinsics");

  FramePairResult r;
  r.xi = xi_prior;
  r.initial_xi = xi_prior;
  const auto degrade = [&](std::string msg) {
    r.degraded = true;
    r.message = std::move(msg);
    r.xi = xi_prior;
    r.b.assign(r.clusters.count(), 0.0);
    finish_scores(r, cfg);
    return r;
  };

  FlowField optical;
  if (cfg.segmentation_enabled) optical = compute_optical_flow(cfg.flow, a, b, exec);
  try {
    r.clusters = cluster_frame(a, a.intrinsics, cfg.clustering, exec);
  } catch (const EmptyCloudError& e) {
    return degrade(e.what());
  }
  const AdjacencyGraph graph = build_adjacency(r.clusters);

  const VoResult init = solve_vo(a, b, cfg.solver, xi_prior, std::nullopt, exec);
  r.vo_iterations = init.iterations;
  if (!init.ok()) return degrade(std::string("initial VO ") + to_string(init.status) + ": " + init.message);
  r.xi = init.xi;
  r.initial_xi = init.xi;
  r.b.assign(r.clusters.count(), 0.0);
  if (!cfg.segmentation_enabled) {
    r.converged = true;
    finish_scores(r, cfg);
    return r;
  }

  for (int it = 1; it <= cfg.max_outer_iterations; ++it) {
    const FlowField ego = compute_ego_flow(a, r.xi, a.intrinsics, exec);
    const FlowResidualField rf = compute_flow_residual(optical, ego);
    const ResidualImages res = compute_residuals(a, b, r.xi, exec);
    const ClusterResidual delta = aggregate_cluster_residuals(r.clusters, res, rf, cfg.segmentation);

    std::vector<double> b_new;
    double tb = 0.0, tt = 0.0;
    try {
      std::tie(tb, tt) = pick_thresholds(delta, cfg.segmentation);
      b_new = solve_scores(delta.delta, graph, tb, tt, cfg.segmentation.lambda_g).b;
    } catch (const DegenerateInputError& e) {
      r.segmentation_degenerate = true;
      r.message = e.what();
      b_new.assign(r.clusters.count(), 0.0);
    }

    const VoResult vo = solve_vo(a, b, cfg.solver, r.xi, ClusterScoreView{&r.clusters, b_new}, exec);
    r.vo_iterations.insert(r.vo_iterations.end(), vo.iterations.begin(), vo.iterations.end());
    if (!vo.ok()) return degrade(std::string("weighted VO ") + to_string(vo.status) + ": " + vo.message);

    OuterIterationRecord rec = score_stats(b_new, cfg.segmentation.static_cutoff);
    rec.iteration = it;
    rec.theta_b = tb;
    rec.theta_t = tt;
    rec.step_norm = (vo.xi.vector() - r.xi.vector()).norm();
    for (std::size_t i = 0; i < b_new.size(); ++i) {
      const double d = std::abs(b_new[i] - r.b[i]);
      rec.max_score_change = std::max(rec.max_score_change, d);
      if (d >= cfg.score_eps) ++rec.changed_scores;
    }
    if (!vo.iterations.empty()) rec.vo_energy = vo.iterations.back().energy;
    r.iterations.push_back(rec);

    r.xi = vo.xi;
    r.b = std::move(b_new);
    if (r.segmentation_degenerate) break;
    if (rec.step_norm < cfg.pose_eps && rec.max_score_change < cfg.score_eps) {
      r.converged = true;
      break;
    }
  }
  finish_scores(r, cfg);
  return r;
}

SequenceResult process_sequence(const std::vector<RgbdFrame>& frames, const PipelineConfig& cfg, Execution exec) {
  if (frames.size() < 2) throw InsufficientDataError("a sequence needs at least 2 frames");
  SequenceResult out;
  RigidTransform world_to_camera = RigidTransform::identity();
  out.trajectory.push_back({frames[0].timestamp, RigidTransform::identity()});
  Twist prior;
  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    FramePairResult r = process_pair(frames[k], frames[k + 1], cfg, prior, exec);
    if (r.degraded) ++out.degraded_pairs;
    world_to_camera = se3_exp(r.xi) * world_to_camera;
    out.trajectory.push_back({frames[k + 1].timestamp, world_to_camera.inverse()});
    prior = r.xi;
    out.pairs.push_back(std::move(r));
  }
  return out;
}

StaticMap accumulate_static_map(const std::vector<RgbdFrame>& frames, const std::vector<RigidTransform>& poses,
                                const std::vector<Mask>& masks, double voxel_size) {
  if (frames.size() != poses.size() || frames.size() != masks.size())
    throw DimensionError("frames, poses and masks must have equal length");
  if (!(voxel_size > 0.0)) throw ParameterError("voxel size must be positive");
  struct Acc {
    Vec3 sum = Vec3::Zero();
    double intensity = 0.0;
    std::size_t n = 0;
  };
  std::map<std::array<long, 3>, Acc> voxels;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const RgbdFrame& fr = frames[f];
    const Mask& m = masks[f];
    if (!m.empty() && !m.same_shape(fr.depth)) throw DimensionError("mask does not match frame");
    for (int y = 0; y < fr.height(); ++y) {
      for (int x = 0; x < fr.width(); ++x) {
        const double z = fr.depth(x, y);
        if (!(z > 0.0) || (!m.empty() && m(x, y) != 0)) continue;
        const Vec3 p = poses[f] * backproject({double(x), double(y)}, z, fr.intrinsics);
        const std::array<long, 3> key{static_cast<long>(std::floor(p.x() / voxel_size)),
                                      static_cast<long>(std::floor(p.y() / voxel_size)),
                                      static_cast<long>(std::floor(p.z() / voxel_size))};
        auto& acc = voxels[key];
        acc.sum += p;
        acc.intensity += fr.intensity(x, y);
        ++acc.n;
      }
    }
  }
  StaticMap map;
  map.points.reserve(voxels.size());
  for (const auto& [key, acc] : voxels) {
    const double n = static_cast<double>(acc.n);
    map.points.push_back({acc.sum / n, acc.intensity / n});
  }
  map.empty = map.points.empty();
  return map;
}

void write_static_map(const StaticMap& map, std::ostream& out) {
  const auto old = out.precision(6);
  out << std::fixed;
  for (const auto& p : map.points) {
    out << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' ' << p.intensity << '\n';
  }
  out.unsetf(std::ios::floatfield);
  out.precision(old);
}

}  // namespace flowfusion
