#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "flowfusion/error.hpp"
#include "flowfusion/geometry.hpp"
#include "support.hpp"

using namespace flowfusion;

namespace {

const PinholeIntrinsics kK{500.0, 500.0, 320.0, 240.0, 640, 480};
constexpr double kPi = 3.14159265358979323846;

// independent oracle: truncated power series of the 4x4 twist matrix
Eigen::Matrix4d series_exp(const Twist& xi) {
  Eigen::Matrix4d X = Eigen::Matrix4d::Zero();
  X.topLeftCorner<3, 3>() = skew(xi.w);
  X.topRightCorner<3, 1>() = xi.v;
  Eigen::Matrix4d term = Eigen::Matrix4d::Identity(), sum = Eigen::Matrix4d::Identity();
  for (int k = 1; k < 40; ++k) {
    term = term * X / k;
    sum += term;
  }
  return sum;
}

}  // namespace

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const Pixel p = project(Vec3(0, 0, 1), kK);
  EXPECT_EQ(p.u, 320.0);
  EXPECT_EQ(p.v, 240.0);
}

TEST(Project, OffAxisPoint) {
  const Pixel p = project(Vec3(1, 0, 2), kK);
  EXPECT_DOUBLE_EQ(p.u, 570.0);
  EXPECT_DOUBLE_EQ(p.v, 240.0);
}

TEST(Project, BehindCameraThrows) {
  EXPECT_THROW(project(Vec3(0, 0, -1), kK), NonProjectableError);
  EXPECT_THROW(project(Vec3(0, 0, 0), kK), NonProjectableError);
}

TEST(Backproject, Examples) {
  EXPECT_TRUE(backproject({320, 240}, 2.0, kK).isApprox(Vec3(0, 0, 2)));
  EXPECT_TRUE(backproject({570, 240}, 2.0, kK).isApprox(Vec3(1, 0, 2)));
  EXPECT_THROW(backproject({320, 240}, 0.0, kK), InvalidDepthError);
  EXPECT_THROW(backproject({320, 240}, -1.0, kK), InvalidDepthError);
  EXPECT_THROW(backproject({320, 240}, std::nan(""), kK), InvalidDepthError);
  EXPECT_THROW(backproject({320, 240}, INFINITY, kK), InvalidDepthError);
}

TEST(Backproject, RoundTripProperty) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 639.0), v(0.0, 479.0), z(0.1, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const Pixel p{u(rng), v(rng)};
    const Pixel q = project(backproject(p, z(rng), kK), kK);
    ASSERT_NEAR(q.u, p.u, 1e-9);
    ASSERT_NEAR(q.v, p.v, 1e-9);
  }
}

TEST(Intrinsics, Validate) {
  EXPECT_NO_THROW(kK.validate());
  EXPECT_THROW((PinholeIntrinsics{0, 500, 320, 240, 640, 480}.validate()), ParameterError);
  EXPECT_THROW((PinholeIntrinsics{500, -1, 320, 240, 640, 480}.validate()), ParameterError);
  EXPECT_THROW((PinholeIntrinsics{500, 500, 640, 240, 640, 480}.validate()), ParameterError);
  EXPECT_THROW((PinholeIntrinsics{500, 500, 320, 0, 640, 480}.validate()), ParameterError);
}

TEST(Intrinsics, DownsampledKeepsPixelCenters) {
  // a point projecting to fine pixel centre u lands on coarse (u - 0.5) / 2
  const PinholeIntrinsics c = kK.downsampled();
  EXPECT_EQ(c.width, 320);
  EXPECT_EQ(c.height, 240);
  const Vec3 X(0.3, -0.2, 2.5);
  const Pixel f = project(X, kK);
  const Pixel g = project(X, c);
  EXPECT_NEAR(g.u, (f.u - 0.5) / 2.0, 1e-12);
  EXPECT_NEAR(g.v, (f.v - 0.5) / 2.0, 1e-12);
}

TEST(Se3Exp, ZeroIsIdentity) {
  const RigidTransform T = se3_exp(Twist{});
  EXPECT_EQ(T.R, Mat3::Identity());
  EXPECT_EQ(T.t, Vec3::Zero());
}

TEST(Se3Exp, PureTranslation) {
  const RigidTransform T = se3_exp(Twist(Vec3(0.1, 0, 0), Vec3::Zero()));
  EXPECT_EQ(T.R, Mat3::Identity());
  EXPECT_TRUE(T.t.isApprox(Vec3(0.1, 0, 0), 1e-15));
}

TEST(Se3Exp, QuarterTurnAboutZ) {
  const RigidTransform T = se3_exp(Twist(Vec3::Zero(), Vec3(0, 0, kPi / 2)));
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LT((T.R - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(T.t.norm(), 1e-15);
}

TEST(Se3Exp, SmallAnglesAroundBranchThreshold) {
  const Vec3 v(0.2, -0.1, 0.05);
  const Vec3 axis = Vec3(1, 2, -2) / 3.0;
  for (double theta : {0.0, 1e-12, 0.99e-8, 1.01e-8, 1e-6, 1e-4, 0.99e-2, 1.01e-2, 0.1}) {
    const Twist xi(v, axis * theta);
    const Eigen::Matrix4d oracle = series_exp(xi);
    const RigidTransform T = se3_exp(xi);
    EXPECT_LT((T.R - oracle.topLeftCorner<3, 3>()).cwiseAbs().maxCoeff(), 1e-15) << theta;
    EXPECT_LT((T.t - oracle.topRightCorner<3, 1>()).cwiseAbs().maxCoeff(), 1e-15) << theta;
    const Twist back = se3_log(T);
    EXPECT_LT((back.vector() - xi.vector()).norm(), 1e-14) << theta;
  }
}

TEST(Se3Exp, MatchesMatrixExponential) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const Twist xi = fftest::random_twist(rng, 0.5, 0.5);
    const Eigen::Matrix4d oracle = series_exp(xi);
    const RigidTransform T = se3_exp(xi);
    EXPECT_LT((T.R - oracle.topLeftCorner<3, 3>()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((T.t - oracle.topRightCorner<3, 1>()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Se3Exp, InverseCompositionProperty) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    Vec6 x;
    for (int k = 0; k < 6; ++k) x[k] = u(rng);
    x *= u(rng) / x.norm();  // ||xi|| <= 1
    const Twist xi = Twist::from_vector(x);
    const RigidTransform I = se3_exp(xi) * se3_exp(-xi);
    ASSERT_LT((I.R - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    ASSERT_LT(I.t.cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Se3Exp, RotationIsOrthonormalProperty) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const RigidTransform T = se3_exp(fftest::random_twist(rng, 2.0, 1.5));
    ASSERT_LT((T.R.transpose() * T.R - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    ASSERT_NEAR(T.R.determinant(), 1.0, 1e-9);
    ASSERT_TRUE(T.is_valid(1e-9));
  }
}

TEST(Se3Log, InvertsExp) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Twist xi = fftest::random_twist(rng, 0.5, 0.8);
    if (xi.w.norm() > 3.0) continue;  // log is only the inverse below pi
    const Twist back = se3_log(se3_exp(xi));
    ASSERT_LT((back.vector() - xi.vector()).norm(), 1e-9);
  }
  EXPECT_TRUE(se3_log(RigidTransform::identity()).is_zero());
}

TEST(Se3Log, NearPi) {
  const Twist xi(Vec3(0.1, 0.2, 0.3), Vec3(0, 3.14159, 0));
  const Twist back = se3_log(se3_exp(xi));
  EXPECT_LT((back.vector() - xi.vector()).norm(), 1e-6);
}

TEST(RigidTransform, QuaternionRoundTrip) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform T = se3_exp(fftest::random_twist(rng, 1.0, 1.0));
    const auto q = T.quaternion();
    EXPECT_GE(q.w(), 0.0);
    const RigidTransform U = RigidTransform::from_quaternion(T.t, q);
    EXPECT_LT((U.R - T.R).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RigidTransform, InverseAndValidity) {
  std::mt19937_64 rng(6);
  const RigidTransform T = se3_exp(fftest::random_twist(rng, 1.0, 1.0));
  const RigidTransform I = T * T.inverse();
  EXPECT_LT((I.R - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(I.t.norm(), 1e-12);
  RigidTransform bad = T;
  bad.R(0, 0) += 1e-6;
  EXPECT_FALSE(bad.is_valid(1e-9));
  RigidTransform mirror;
  mirror.R = -Mat3::Identity();
  EXPECT_FALSE(mirror.is_valid(1e-9));
}

TEST(Warp, ZeroTwistIsExactIdentity) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 639.0), v(0.0, 479.0), z(0.1, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const Pixel p{u(rng), v(rng)};
    const WarpResult w = warp_pixel(p, z(rng), Twist{}, kK);
    ASSERT_EQ(w.pixel.u, p.u);
    ASSERT_EQ(w.pixel.v, p.v);
  }
}

TEST(Warp, TranslationExampleUnderAToBConvention) {
  // p_B = p_A + t moves the point to +x in camera B: 320 + 500 * 0.1 / 2
  const WarpResult w = warp_pixel({320, 240}, 2.0, Twist(Vec3(0.1, 0, 0), Vec3::Zero()), kK);
  EXPECT_NEAR(w.pixel.u, 345.0, 1e-12);
  EXPECT_NEAR(w.pixel.v, 240.0, 1e-12);
  EXPECT_NEAR(w.z, 2.0, 1e-15);
  const Pixel oracle = project(se3_exp(Twist(Vec3(0.1, 0, 0), Vec3::Zero())) * backproject({320, 240}, 2.0, kK), kK);
  EXPECT_EQ(w.pixel.u, oracle.u);
}

TEST(Warp, ReportsTransformedDepth) {
  const Twist xi(Vec3(0.0, 0.0, 0.5), Vec3::Zero());
  EXPECT_NEAR(warp_pixel({100, 100}, 2.0, xi, kK).z, 2.5, 1e-12);
}

TEST(Warp, BehindCameraAndInvalidDepth) {
  const Twist back(Vec3(0, 0, -3), Vec3::Zero());
  EXPECT_THROW(warp_pixel({320, 240}, 2.0, back, kK), WarpBehindCameraError);
  EXPECT_FALSE(try_warp({320, 240}, 2.0, se3_exp(back), kK).has_value());
  EXPECT_THROW(warp_pixel({320, 240}, 0.0, Twist{}, kK), InvalidDepthError);
}

TEST(Warp, OutOfImageResultIsReturnedForCallerToCheck) {
  const WarpResult w = warp_pixel({630, 240}, 1.0, Twist(Vec3(0.5, 0, 0), Vec3::Zero()), kK);
  EXPECT_GT(w.pixel.u, kK.width - 1.0);
}
