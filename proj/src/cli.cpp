#include "flowfusion/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "flowfusion/dataset_io.hpp"
#include "flowfusion/error.hpp"
#include "flowfusion/evaluation.hpp"
#include "flowfusion/parallel.hpp"
#include "flowfusion/pipeline.hpp"
#include "flowfusion/synthetic.hpp"

namespace flowfusion::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, const char* f = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

struct Manifest {
  std::vector<std::pair<std::string, std::string>> entries;
  void add(const std::string& k, const std::string& v) { entries.emplace_back(k, one_line(v)); }
  void write(const fs::path& path) const {
    std::ofstream os(path);
    for (const auto& [k, v] : entries) os << k << '=' << v << '\n';
  }
};

struct LoadedInput {
  std::vector<RgbdFrame> frames;
  std::optional<Trajectory> ground_truth;
  std::shared_ptr<const std::vector<FlowField>> exact_flow;
  std::optional<fs::path> dataset;
};

FlowProvider resolve_flow(const std::string& source, const LoadedInput& in, const PipelineConfig& base) {
  if (source == "builtin") return base.flow;
  if (source == "exact") {
    if (in.exact_flow) return ExactSyntheticFlow{in.exact_flow};
    if (in.dataset) return FileImportFlow::open(*in.dataset / "gt_flow");
    throw ProviderError("exact flow needs a synthetic spec or a dataset with gt_flow/");
  }
  if (source.rfind("dir:", 0) == 0) return FileImportFlow::open(source.substr(4));
  throw ConfigError("flow provider must be exact, builtin or dir:<path>, got '" + source + "'");
}

void write_run_outputs(const fs::path& out, const std::vector<RgbdFrame>& frames, const SequenceResult& res,
                       const PipelineConfig& cfg, const std::optional<Trajectory>& gt) {
  fs::create_directories(out / "masks");
  write_trajectory(res.trajectory, out / "trajectory.txt");
  if (gt) write_trajectory(*gt, out / "groundtruth.txt");

  std::ofstream diag(out / "diagnostics.csv");
  diag << "pair,frame_a,frame_b,timestamp_a,timestamp_b,status,outer_iterations,converged,clusters,"
          "dynamic_clusters,max_b,mean_b,vx,vy,vz,wx,wy,wz,message\n";
  std::ofstream outer(out / "outer_iterations.csv");
  outer << "pair,iteration,theta_b,theta_t,step_norm,max_score_change,changed_scores,dynamic_clusters,max_b,"
           "mean_b,vo_energy\n";
  std::ofstream vo(out / "vo_diagnostics.csv");
  vo << "pair,level,iteration,energy_before,energy,step_norm,halvings,accepted,c_i,c_d,valid_pixels\n";

  std::vector<RigidTransform> poses;
  std::vector<Mask> masks;
  std::vector<RgbdFrame> map_frames;
  for (std::size_t k = 0; k < res.pairs.size(); ++k) {
    const FramePairResult& p = res.pairs[k];
    double max_b = 0.0, sum_b = 0.0;
    std::size_t dyn = 0;
    for (double b : p.b) {
      max_b = std::max(max_b, b);
      sum_b += b;
      if (b >= cfg.segmentation.static_cutoff) ++dyn;
    }
    const double mean_b = p.b.empty() ? 0.0 : sum_b / static_cast<double>(p.b.size());
    const char* status = p.degraded ? "degraded" : (p.segmentation_degenerate ? "segmentation_degenerate" : "ok");
    diag << k << ',' << frames[k].index << ',' << frames[k + 1].index << ',' << fmt(frames[k].timestamp) << ','
         << fmt(frames[k + 1].timestamp) << ',' << status << ',' << p.iterations.size() << ','
         << (p.converged ? 1 : 0) << ',' << p.clusters.count() << ',' << dyn << ',' << fmt(max_b) << ','
         << fmt(mean_b);
    for (int i = 0; i < 6; ++i) diag << ',' << fmt(p.xi.vector()[i], "%.9g");
    diag << ",\"" << p.message << "\"\n";
    for (const auto& it : p.iterations) {
      outer << k << ',' << it.iteration << ',' << fmt(it.theta_b, "%.9g") << ',' << fmt(it.theta_t, "%.9g") << ','
            << fmt(it.step_norm, "%.9g") << ',' << fmt(it.max_score_change, "%.9g") << ',' << it.changed_scores
            << ',' << it.dynamic_clusters << ',' << fmt(it.max_b) << ',' << fmt(it.mean_b) << ','
            << fmt(it.vo_energy, "%.9g") << '\n';
    }
    std::ostringstream rows;
    write_vo_diagnostics_csv(p.vo_iterations, rows, false);
    std::istringstream lines(rows.str());
    for (std::string line; std::getline(lines, line);) vo << k << ',' << line << '\n';

    const Mask mask = p.mask.empty() ? Mask(frames[k].width(), frames[k].height(), 0) : p.mask;
    write_mask_png(mask, out / "masks" / (std::to_string(frames[k].index) + ".png"));
    if (!p.degraded) {
      map_frames.push_back(frames[k]);
      poses.push_back(res.trajectory[k].pose);
      masks.push_back(mask);
    }
  }
  const StaticMap map = accumulate_static_map(map_frames, poses, masks, cfg.map_voxel_size);
  std::ofstream mp(out / "map.txt");
  write_static_map(map, mp);
}

}  // namespace

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  Manifest m;
  m.add("tool", "flowfusion run");
  m.add("version", FLOWFUSION_VERSION);
  std::string cmd;
  for (const auto& a : opts.command_line) cmd += (cmd.empty() ? "" : " ") + a;
  m.add("command", cmd);
  m.add("threads", std::to_string(worker_threads()));

  std::optional<fs::path> out_dir;
  std::vector<std::pair<std::string, std::string>> timings;
  int code = kExitFatal;
  std::string error;
  try {
    KeyValueConfig kv = opts.config ? KeyValueConfig::load(*opts.config) : KeyValueConfig{};
    if (opts.config) m.add("input.config", opts.config->string());
    if (opts.dataset) kv.set("run.dataset", opts.dataset->string());
    if (opts.synthetic_spec) kv.set("run.synthetic_spec", opts.synthetic_spec->string());
    if (opts.out) kv.set("run.out", opts.out->string());
    if (opts.seed) kv.set("run.seed", std::to_string(*opts.seed));
    if (opts.flow) kv.set("flow.provider", *opts.flow);
    if (opts.no_segmentation) kv.set("segmentation.enabled", "false");
    if (opts.max_outer_iters) kv.set("pipeline.max_outer_iterations", std::to_string(*opts.max_outer_iters));

    if (kv.has("run.out")) out_dir = kv.get_string("run.out", "");
    const std::string dataset = kv.get_string("run.dataset", "");
    const std::string spec_path = kv.get_string("run.synthetic_spec", "");
    const bool has_seed = kv.has("run.seed");
    const int seed = kv.get_int("run.seed", 0);
    const PipelineConfig base = pipeline_config_from(kv);
    for (const auto& key : kv.unused_keys()) throw ConfigError("unknown key " + key, kv.line_of(key));
    if (!out_dir || out_dir->empty()) throw ConfigError("an output directory is required (--out or run.out)");
    if (dataset.empty() == spec_path.empty())
      throw ConfigError("exactly one of --dataset / --synthetic-spec (run.dataset / run.synthetic_spec) is required");
    if (has_seed && seed < 0) throw ConfigError("run.seed must be non-negative", kv.line_of("run.seed"));
    fs::create_directories(*out_dir);
    m.add("output", out_dir->string());

    auto t = Clock::now();
    LoadedInput in;
    if (!dataset.empty()) {
      m.add("input.dataset", dataset);
      in.dataset = dataset;
      TumSequence seq = load_tum_sequence(dataset);
      in.frames = std::move(seq.frames);
      Trajectory gt;
      bool complete = !seq.ground_truth.empty();
      for (std::size_t k = 0; k < seq.ground_truth.size() && complete; ++k) {
        if (seq.ground_truth[k])
          gt.push_back({in.frames[k].timestamp, *seq.ground_truth[k]});
        else
          complete = false;
      }
      if (complete) in.ground_truth = gt;
      if (seq.skipped) m.add("input.skipped_frames", std::to_string(seq.skipped));
      if (has_seed) m.add("seed", std::to_string(seed));
    } else {
      m.add("input.synthetic_spec", spec_path);
      SyntheticSceneSpec spec = load_scene_spec(spec_path);
      if (has_seed) spec.texture_seed = static_cast<std::uint64_t>(seed);
      m.add("seed", std::to_string(spec.texture_seed));
      SyntheticSequence seq = generate_synthetic_sequence(spec);
      std::vector<double> stamps;
      for (const auto& f : seq.frames) stamps.push_back(f.timestamp);
      in.ground_truth = seq.truth.trajectory(stamps);
      in.exact_flow = std::make_shared<const std::vector<FlowField>>(std::move(seq.truth.flow));
      in.frames = std::move(seq.frames);
    }
    timings.emplace_back("time.load_s", fmt(seconds_since(t)));
    m.add("frames", std::to_string(in.frames.size()));

    PipelineConfig cfg = base;
    cfg.flow = resolve_flow(cfg.flow_source, in, base);
    std::istringstream lines(describe_config(base));
    for (std::string line; std::getline(lines, line);) {
      const auto eq = line.find('=');
      m.add("config." + line.substr(0, eq), line.substr(eq + 1));
    }

    t = Clock::now();
    const SequenceResult res = process_sequence(in.frames, cfg);
    timings.emplace_back("time.pipeline_s", fmt(seconds_since(t)));

    t = Clock::now();
    write_run_outputs(*out_dir, in.frames, res, cfg, in.ground_truth);
    timings.emplace_back("time.write_s", fmt(seconds_since(t)));

    m.add("pairs", std::to_string(res.pairs.size()));
    m.add("degraded_pairs", std::to_string(res.degraded_pairs));
    if (in.ground_truth) {
      const AteResult ate = compute_ate(res.trajectory, *in.ground_truth);
      m.add("ate_rmse", fmt(ate.metrics.rmse));
    }
    code = res.degraded_pairs > 0 ? kExitDegraded : kExitOk;
    out << "wrote " << res.trajectory.size() << " poses to " << (*out_dir / "trajectory.txt").string();
    if (res.degraded_pairs) out << " (" << res.degraded_pairs << " degraded pairs)";
    out << '\n';
  } catch (const std::exception& e) {
    error = e.what();
    err << "error: " << error << '\n';
    code = kExitFatal;
  }
  for (const auto& [k, v] : timings) m.add(k, v);
  m.add("status", code == kExitOk ? "ok" : (code == kExitDegraded ? "degraded" : "fatal"));
  m.add("exit_code", std::to_string(code));
  if (!error.empty()) m.add("error", error);
  if (out_dir && !out_dir->empty()) {
    try {
      fs::create_directories(*out_dir);
      m.write(*out_dir / "manifest.txt");
    } catch (const std::exception& e) {
      err << "error: cannot write manifest: " << e.what() << '\n';
      code = kExitFatal;
    }
  }
  return code;
}

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const Trajectory est = read_trajectory(opts.estimate);
    const Trajectory gt = read_trajectory(opts.ground_truth);
    const AteResult ate = compute_ate(est, gt);
    const MetricReport rpe = compute_rpe(est, gt, opts.delta);
    fs::create_directories(opts.out);
    std::ofstream a(opts.out / "ate.csv");
    write_error_csv(ate.metrics, a);
    std::ofstream r(opts.out / "rpe.csv");
    write_error_csv(rpe, r);
    if (ate.alignment.degenerate) err << "warning: trajectory positions are nearly collinear\n";
    out << "ate_rmse=" << fmt(ate.metrics.rmse) << " rpe_rmse=" << fmt(rpe.rmse) << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFatal;
  }
}

int cmd_synth(const SynthOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    SyntheticSceneSpec spec = load_scene_spec(opts.spec);
    if (opts.seed) spec.texture_seed = *opts.seed;
    const SyntheticSequence seq = generate_synthetic_sequence(spec);
    write_synthetic_dataset(seq, spec, opts.out);
    out << "wrote " << seq.frames.size() << " frames to " << opts.out.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFatal;
  }
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  apply_thread_env();
  CLI::App app{"FlowFusion dynamic RGB-D visual odometry"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FLOWFUSION_VERSION);

  RunOptions run;
  std::string dataset, spec, config, flow, out_dir;
  std::uint64_t seed = 0;
  int max_outer = 0;
  auto* r = app.add_subcommand("run", "Run the pipeline on a TUM directory or a synthetic spec");
  r->add_option("--dataset", dataset, "TUM-layout dataset directory");
  r->add_option("--synthetic-spec", spec, "synthetic scene spec file");
  r->add_option("--config", config, "key=value pipeline configuration");
  r->add_option("--flow", flow, "optical flow: exact | builtin | dir:<path>");
  r->add_flag("--no-segmentation", run.no_segmentation, "plain robust VO (all b = 0)");
  r->add_option("--out", out_dir, "output directory");
  auto* seed_opt = r->add_option("--seed", seed, "texture seed for synthetic input");
  auto* outer_opt = r->add_option("--max-outer-iters", max_outer, "outer iteration cap")->check(CLI::PositiveNumber);

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "ATE / RPE of an estimated trajectory against ground truth");
  e->add_option("--est,estimate", ev.estimate, "estimated trajectory (TUM format)")->required();
  e->add_option("--gt,ground_truth", ev.ground_truth, "ground-truth trajectory (TUM format)")->required();
  e->add_option("--delta", ev.delta, "RPE interval in seconds")->check(CLI::PositiveNumber);
  e->add_option("--out", ev.out, "directory for ate.csv and rpe.csv");

  SynthOptions sy;
  std::uint64_t synth_seed = 0;
  auto* s = app.add_subcommand("synth", "Render a synthetic dataset with ground truth");
  s->add_option("--spec,spec", sy.spec, "scene spec file")->required();
  s->add_option("--out", sy.out, "output directory")->required();
  auto* synth_seed_opt = s->add_option("--seed", synth_seed, "texture seed override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) {
      app.exit(ex, out, err);
      return kExitOk;
    }
    app.exit(ex, out, err);
    return kExitFatal;
  }

  if (r->parsed()) {
    for (int i = 0; i < argc; ++i) run.command_line.emplace_back(argv[i]);
    if (!dataset.empty()) run.dataset = dataset;
    if (!spec.empty()) run.synthetic_spec = spec;
    if (!config.empty()) run.config = config;
    if (!flow.empty()) run.flow = flow;
    if (!out_dir.empty()) run.out = out_dir;
    if (seed_opt->count()) run.seed = seed;
    if (outer_opt->count()) run.max_outer_iters = max_outer;
    return cmd_run(run, out, err);
  }
  if (e->parsed()) return cmd_eval(ev, out, err);
  if (synth_seed_opt->count()) sy.seed = synth_seed;
  return cmd_synth(sy, out, err);
}

}  // namespace flowfusion::cli
