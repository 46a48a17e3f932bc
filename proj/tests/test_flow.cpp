#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "flowfusion/dataset_io.hpp"
#include "flowfusion/error.hpp"
#include "flowfusion/flow.hpp"
#include "support.hpp"

using namespace flowfusion;

namespace {

const PinholeIntrinsics kK{100.0, 100.0, 39.5, 29.5, 80, 60};

double texture(double x, double y) {
  return 0.5 + 0.2 * std::sin(0.45 * x) * std::cos(0.3 * y) + 0.15 * std::sin(0.21 * (x + 2 * y)) +
         0.1 * std::cos(0.37 * y - 0.13 * x);
}

RgbdFrame textured_frame(double shift_x, double shift_y, std::size_t index = 0) {
  RgbdFrame f;
  f.index = index;
  f.intrinsics = kK;
  f.intensity = ImageD(kK.width, kK.height);
  f.depth = ImageD(kK.width, kK.height, 2.0);
  for (int y = 0; y < kK.height; ++y)
    for (int x = 0; x < kK.width; ++x) f.intensity(x, y) = texture(x - shift_x, y - shift_y);
  return f;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(BuiltinFlow, IdenticalFramesGiveZeroFlow) {
  const RgbdFrame a = textured_frame(0, 0);
  const FlowField f = compute_optical_flow(PyramidalLkFlow{}, a, a);
  std::size_t valid = 0;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      if (!f.is_valid(x, y)) continue;
      ++valid;
      EXPECT_LT(std::hypot(f.u(x, y), f.v(x, y)), 0.1);
    }
  EXPECT_GT(valid, f.u.size() / 2);
}

TEST(BuiltinFlow, RecoversKnownShift) {
  const RgbdFrame a = textured_frame(0, 0), b = textured_frame(3, 0);
  const FlowField f = compute_optical_flow(PyramidalLkFlow{}, a, b);
  std::vector<double> us, vs;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x)
      if (f.is_valid(x, y)) {
        us.push_back(f.u(x, y));
        vs.push_back(f.v(x, y));
      }
  ASSERT_GT(us.size(), f.u.size() / 2);
  EXPECT_NEAR(median(us), 3.0, 0.3);
  EXPECT_NEAR(median(vs), 0.0, 0.3);
}

TEST(BuiltinFlow, FlatImageIsInvalid) {
  RgbdFrame a = textured_frame(0, 0);
  a.intensity = ImageD(kK.width, kK.height, 0.5);
  const FlowField f = compute_optical_flow(PyramidalLkFlow{}, a, a);
  for (std::size_t i = 0; i < f.valid.size(); ++i) EXPECT_EQ(f.valid[i], 0);
}

TEST(BuiltinFlow, DeterministicProperty) {
  const RgbdFrame a = textured_frame(0, 0), b = textured_frame(1.7, -0.8);
  const FlowField f1 = compute_optical_flow(PyramidalLkFlow{}, a, b);
  const FlowField f2 = compute_optical_flow(PyramidalLkFlow{}, a, b);
  const FlowField f3 = compute_optical_flow(PyramidalLkFlow{}, a, b, Execution::serial);
  EXPECT_EQ(f1, f2);
  EXPECT_EQ(f1, f3);
}

TEST(OpticalFlow, DimensionMismatchThrows) {
  RgbdFrame a = textured_frame(0, 0), b = textured_frame(0, 0);
  b.intensity = ImageD(40, 30, 0.5);
  b.depth = ImageD(40, 30, 1.0);
  EXPECT_THROW(compute_optical_flow(PyramidalLkFlow{}, a, b), DimensionError);
}

TEST(ExactFlow, PassesGroundTruthThrough) {
  const SyntheticSequence seq = generate_synthetic_sequence(fftest::small(fftest::moving_box_spec(3)));
  const ExactSyntheticFlow p{std::make_shared<std::vector<FlowField>>(seq.truth.flow)};
  EXPECT_EQ(compute_optical_flow(p, seq.frames[0], seq.frames[1]), seq.truth.flow[0]);
  EXPECT_EQ(compute_optical_flow(p, seq.frames[1], seq.frames[2]), seq.truth.flow[1]);
  // non-consecutive or out-of-range pairs have no data
  EXPECT_THROW(compute_optical_flow(p, seq.frames[0], seq.frames[2]), ProviderError);
  EXPECT_THROW(compute_optical_flow(p, seq.frames[2], seq.frames[2]), ProviderError);
}

TEST(FileImportFlow, MissingDirectoryNamesIt) {
  try {
    FileImportFlow::open("/nonexistent/flow_dir_xyz");
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/flow_dir_xyz"), std::string::npos);
  }
}

TEST(FileImportFlow, LoadsByIndexAndReportsMissingFile) {
  const auto dir = fftest::temp_dir("flow_import");
  FlowField f(kK.width, kK.height);
  for (int y = 0; y < kK.height; ++y)
    for (int x = 0; x < kK.width; ++x) f.set(x, y, 0.25 * x, -0.5 * y);
  const FileImportFlow p = FileImportFlow::open(dir);
  EXPECT_EQ(p.file_for(4, 5).filename(), "flow_4_5.flo");
  write_flow_file(f, p.file_for(4, 5));
  const RgbdFrame a = textured_frame(0, 0, 4), b = textured_frame(0, 0, 5), c = textured_frame(0, 0, 6);
  EXPECT_EQ(compute_optical_flow(p, a, b), f);
  EXPECT_THROW(compute_optical_flow(p, b, c), ProviderError);
}

TEST(EgoFlow, ZeroTwistIsExactlyZero) {
  const SyntheticSequence seq = generate_synthetic_sequence(fftest::small(fftest::room_spec(2)));
  const RgbdFrame& a = seq.frames[0];
  const FlowField f = compute_ego_flow(a, Twist{}, a.intrinsics);
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      EXPECT_EQ(f.is_valid(x, y), a.depth(x, y) > 0);
      EXPECT_EQ(f.u(x, y), 0.0);
      EXPECT_EQ(f.v(x, y), 0.0);
    }
}

TEST(EgoFlow, TranslationOnConstantDepth) {
  const RgbdFrame a = textured_frame(0, 0);
  const FlowField f = compute_ego_flow(a, Twist(Vec3(0.04, 0, 0), Vec3::Zero()), kK);
  // fx * t / z = 100 * 0.04 / 2
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      ASSERT_TRUE(f.is_valid(x, y));
      EXPECT_NEAR(f.u(x, y), 2.0, 1e-12);
      EXPECT_NEAR(f.v(x, y), 0.0, 1e-12);
    }
}

TEST(EgoFlow, RotationAboutOpticalAxisCirculates) {
  // principal point on a pixel centre so the fixed point is sampled
  RgbdFrame a = textured_frame(0, 0);
  a.intrinsics = PinholeIntrinsics{100.0, 100.0, 40.0, 30.0, 80, 60};
  const double w = 0.02;
  const FlowField f = compute_ego_flow(a, Twist(Vec3::Zero(), Vec3(0, 0, w)), a.intrinsics);
  EXPECT_LT(std::hypot(f.u(40, 30), f.v(40, 30)), 1e-9);
  for (int y = 0; y < f.height(); y += 7)
    for (int x = 0; x < f.width(); x += 7) {
      // analytic: rotating (dx, dy) about the principal point by w
      const double dx = x - 40.0, dy = y - 30.0;
      EXPECT_NEAR(f.u(x, y), dx * std::cos(w) - dy * std::sin(w) - dx, 1e-9);
      EXPECT_NEAR(f.v(x, y), dx * std::sin(w) + dy * std::cos(w) - dy, 1e-9);
    }
}

TEST(EgoFlow, BehindCameraIsInvalid) {
  const RgbdFrame a = textured_frame(0, 0);
  const FlowField f = compute_ego_flow(a, Twist(Vec3(0, 0, -3.0), Vec3::Zero()), kK);
  for (std::size_t i = 0; i < f.valid.size(); ++i) EXPECT_EQ(f.valid[i], 0);
}

TEST(FlowResidual, EqualFieldsGiveZero) {
  const RgbdFrame a = textured_frame(0, 0);
  const FlowField ego = compute_ego_flow(a, Twist(Vec3(0.01, 0.02, 0), Vec3(0, 0.01, 0)), kK);
  const FlowResidualField r = compute_flow_residual(ego, ego);
  for (std::size_t i = 0; i < r.magnitude.size(); ++i) EXPECT_EQ(r.magnitude[i], 0.0);
}

TEST(FlowResidual, ValidityIsConjunction) {
  FlowField a(3, 1), b(3, 1);
  a.set(0, 0, 1, 1);
  b.set(0, 0, 1, 1);
  a.set(1, 0, 1, 1);
  b.set(2, 0, 1, 1);
  const FlowResidualField r = compute_flow_residual(a, b);
  EXPECT_EQ(r.valid[0], 1);
  EXPECT_EQ(r.valid[1], 0);
  EXPECT_EQ(r.valid[2], 0);
  EXPECT_THROW(compute_flow_residual(a, FlowField(2, 1)), DimensionError);
}

TEST(FlowResidual, LinearityProperty) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 3.0);
  const RgbdFrame a = textured_frame(0, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const FlowField ego = compute_ego_flow(a, fftest::random_twist(rng, 0.02, 0.01), kK);
    FlowField of = ego;
    ImageD expected(kK.width, kK.height);
    for (int y = 0; y < kK.height; ++y)
      for (int x = 0; x < kK.width; ++x) {
        if (!ego.is_valid(x, y)) continue;
        const double du = n(rng), dv = n(rng);
        of.u(x, y) += du;
        of.v(x, y) += dv;
        expected(x, y) = std::hypot((ego.u(x, y) + du) - ego.u(x, y), (ego.v(x, y) + dv) - ego.v(x, y));
      }
    const FlowResidualField r = compute_flow_residual(of, ego);
    EXPECT_EQ(r.magnitude, expected);
  }
}

TEST(FlowResidual, StaticPairWithTruthIsNearZero) {
  const SyntheticSequence seq = generate_synthetic_sequence(fftest::room_spec(2));
  const RgbdFrame& a = seq.frames[0];
  const FlowField ego = compute_ego_flow(a, seq.truth.relative_twist(0, 1), a.intrinsics);
  const FlowResidualField r = compute_flow_residual(seq.truth.flow[0], ego);
  std::vector<double> vals;
  double worst = 0.0;
  for (std::size_t i = 0; i < r.magnitude.size(); ++i)
    if (r.valid[i]) {
      vals.push_back(r.magnitude[i]);
      worst = std::max(worst, r.magnitude[i]);
    }
  ASSERT_GT(vals.size(), r.magnitude.size() / 2);
  std::sort(vals.begin(), vals.end());
  EXPECT_LT(vals[static_cast<std::size_t>(0.99 * (vals.size() - 1))], 1e-5);
  EXPECT_LT(worst, 1e-6);
}

TEST(FlowResidual, MovingBoxStandsOut) {
  const SyntheticSequence seq = generate_synthetic_sequence(fftest::moving_box_spec(2));
  const RgbdFrame& a = seq.frames[0];
  const FlowField ego = compute_ego_flow(a, seq.truth.relative_twist(0, 1), a.intrinsics);
  const FlowResidualField r = compute_flow_residual(seq.truth.flow[0], ego);
  double on = 0, off = 0;
  std::size_t n_on = 0, n_off = 0;
  for (std::size_t i = 0; i < r.magnitude.size(); ++i) {
    if (!r.valid[i]) continue;
    if (seq.truth.dynamic_mask[0][i]) {
      on += r.magnitude[i];
      ++n_on;
    } else {
      off += r.magnitude[i];
      ++n_off;
    }
  }
  ASSERT_GT(n_on, 0u);
  ASSERT_GT(n_off, 0u);
  // off-mask residual is essentially zero, so compare against a floor
  EXPECT_GE(on / n_on, 10.0 * std::max(off / n_off, 1e-9));
  EXPECT_GE(on / n_on, 3.0);
}
