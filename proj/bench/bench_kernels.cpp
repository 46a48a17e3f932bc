// Serial reference vs OpenMP kernels on a full-resolution moving-box pair.
// Thread count follows FLOWFUSION_THREADS / OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "flowfusion/dataset_io.hpp"
#include "flowfusion/kernels.hpp"
#include "flowfusion/synthetic.hpp"
#include "flowfusion/vo_solver.hpp"

using namespace flowfusion;
namespace k = flowfusion::kernels;

namespace {

struct Fixture {
  SyntheticSceneSpec spec;
  SyntheticSequence seq;
  ImageD wd, bx, by;
  k::VoLevel level;
  RigidTransform T;
  std::vector<k::Feature> points, centers;

  Fixture() {
    spec = load_scene_spec(FLOWFUSION_DATA_DIR "/moving_box.cfg");
    spec.frame_count = 2;
    seq = generate_synthetic_sequence(spec);
    const RgbdFrame &a = seq.frames[0], &b = seq.frames[1];
    wd = compute_pixel_weights(a).w_d;
    bx = gradient_x(b.intensity);
    by = gradient_y(b.intensity);
    level.intensity_a = &a.intensity;
    level.depth_a = &a.depth;
    level.intensity_b = &b.intensity;
    level.depth_b = &b.depth;
    level.depth_weight = &wd;
    level.K = a.intrinsics;
    T = se3_exp(seq.truth.relative_twist(0, 1));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    points.resize(a.width() * a.height());
    for (auto& p : points) p = {u(rng), u(rng), u(rng), u(rng)};
    centers.resize(300);
    for (auto& c : centers) c = {u(rng), u(rng), u(rng), u(rng)};
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

template <bool Serial>
void BM_AssignNearest(benchmark::State& state) {
  const Fixture& f = fixture();
  std::vector<int> labels(f.points.size(), -1);
  std::vector<double> dist(f.points.size());
  for (auto _ : state) {
    std::size_t n = Serial ? k::serial::assign_nearest(f.points, f.centers, {}, labels, dist)
                           : k::assign_nearest(f.points, f.centers, {}, labels, dist);
    benchmark::DoNotOptimize(n);
  }
}

template <bool Serial>
void BM_EgoFlow(benchmark::State& state) {
  const Fixture& f = fixture();
  const RgbdFrame& a = f.seq.frames[0];
  for (auto _ : state) {
    FlowField flow = Serial ? k::serial::ego_flow(a, f.T, a.intrinsics) : k::ego_flow(a, f.T, a.intrinsics);
    benchmark::DoNotOptimize(flow);
  }
}

template <bool Serial>
void BM_LucasKanade(benchmark::State& state) {
  const Fixture& f = fixture();
  const ImageD &a = f.seq.frames[0].intensity, &b = f.seq.frames[1].intensity;
  for (auto _ : state) {
    ImageD u(a.width(), a.height(), 0.0), v(a.width(), a.height(), 0.0);
    Mask m(a.width(), a.height());
    if (Serial)
      k::serial::lk_refine_level(a, b, f.bx, f.by, {}, u, v, m);
    else
      k::lk_refine_level(a, b, f.bx, f.by, {}, u, v, m);
    benchmark::DoNotOptimize(u);
  }
}

template <bool Serial>
void BM_ResidualImages(benchmark::State& state) {
  const Fixture& f = fixture();
  const int w = f.level.K.width, h = f.level.K.height;
  ImageD ri(w, h), rd(w, h);
  Mask m(w, h);
  for (auto _ : state) {
    if (Serial)
      k::serial::residual_images(f.level, f.T, ri, rd, m);
    else
      k::residual_images(f.level, f.T, ri, rd, m);
    benchmark::DoNotOptimize(ri);
  }
}

template <bool Serial>
void BM_AccumulateVo(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) {
    k::NormalEquations ne = Serial ? k::serial::accumulate_vo(f.level, f.T, 0.05, 0.01, true)
                                   : k::accumulate_vo(f.level, f.T, 0.05, 0.01, true);
    benchmark::DoNotOptimize(ne);
  }
}

template <bool Serial>
void BM_Render(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) {
    SyntheticSequence s = generate_synthetic_sequence(f.spec, Serial ? Execution::serial : Execution::parallel);
    benchmark::DoNotOptimize(s);
  }
}

}  // namespace

BENCHMARK(BM_AssignNearest<true>)->Name("assign_nearest/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssignNearest<false>)->Name("assign_nearest/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EgoFlow<true>)->Name("ego_flow/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EgoFlow<false>)->Name("ego_flow/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LucasKanade<true>)->Name("lk_level/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LucasKanade<false>)->Name("lk_level/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ResidualImages<true>)->Name("residual_images/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ResidualImages<false>)->Name("residual_images/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AccumulateVo<true>)->Name("accumulate_vo/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AccumulateVo<false>)->Name("accumulate_vo/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Render<true>)->Name("render_pair/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Render<false>)->Name("render_pair/omp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
