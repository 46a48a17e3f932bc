#pragma once

// Pinhole camera and SE(3) helpers shared by every stage.
//
// Convention: a RigidTransform T(xi) maps frame-A camera coordinates into
// frame-B camera coordinates, p_B = R * p_A + t. Warping therefore sends a
// pixel of A to where its 3D point is seen by B. Pixel coordinates are
// continuous with (0,0) at the center of the top-left pixel.

#include <array>
#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace flowfusion {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct PinholeIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws ParameterError unless fx, fy > 0 and the principal point is inside the image.
  void validate() const;
  /// Intrinsics of a 2x average-pooled image (pixel-center convention).
  PinholeIntrinsics downsampled() const;

  bool operator==(const PinholeIntrinsics&) const = default;
};

/// se(3) element: translational part v (m) and rotational part w (rad).
struct Twist {
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();

  Twist() = default;
  Twist(const Vec3& v_, const Vec3& w_) : v(v_), w(w_) {}
  static Twist from_vector(const Vec6& x) { return {x.head<3>(), x.tail<3>()}; }

  Vec6 vector() const {
    Vec6 x;
    x << v, w;
    return x;
  }
  bool is_zero() const { return v.isZero(0.0) && w.isZero(0.0); }
  bool is_finite() const { return v.allFinite() && w.allFinite(); }
  double norm() const { return vector().norm(); }
  Twist operator-() const { return {-v, -w}; }
  bool operator==(const Twist& o) const { return v == o.v && w == o.w; }
};

struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_quaternion(const Vec3& t, const Eigen::Quaterniond& q);

  Vec3 operator*(const Vec3& p) const { return R * p + t; }
  RigidTransform operator*(const RigidTransform& o) const { return {R * o.R, R * o.t + t}; }
  RigidTransform inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
  Eigen::Quaterniond quaternion() const;
  bool is_identity() const { return R == Mat3::Identity() && t.isZero(0.0); }
  /// Orthonormality and det(R) = 1 within tol.
  bool is_valid(double tol = 1e-9) const;
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

Mat3 skew(const Vec3& a);

/// Throws NonProjectableError when z <= 0.
Pixel project(const Vec3& point, const PinholeIntrinsics& K);
/// Throws InvalidDepthError when depth <= 0 or non-finite.
Vec3 backproject(const Pixel& p, double depth, const PinholeIntrinsics& K);

RigidTransform se3_exp(const Twist& xi);
/// Inverse of se3_exp for rotations with angle < pi.
Twist se3_log(const RigidTransform& T);

Mat3 so3_exp(const Vec3& w);
Vec3 so3_log(const Mat3& R);

/// Rotation angle of R in radians.
double rotation_angle(const Mat3& R);

struct WarpResult {
  Pixel pixel;
  /// Depth of the transformed point in frame B (the |.|_D term of the depth residual).
  double z = 0.0;
  Vec3 point = Vec3::Zero();
};

/// Warps pixel x of frame A, with depth depth_a, through T(xi) into frame B.
/// Throws InvalidDepthError for bad depth and WarpBehindCameraError if the
/// transformed point has z <= 0.
WarpResult warp_pixel(const Pixel& x, double depth_a, const Twist& xi, const PinholeIntrinsics& K);
/// Same warp with a precomputed transform; returns nullopt instead of throwing.
std::optional<WarpResult> try_warp(const Pixel& x, double depth_a, const RigidTransform& T,
                                   const PinholeIntrinsics& K);

}  // namespace flowfusion
