#include "flowfusion/geometry.hpp"

#include <cmath>
#include <sstream>

#include "flowfusion/error.hpp"

namespace flowfusion {

namespace {

constexpr double kSmallAngle = 1e-8;

}  // namespace

void PinholeIntrinsics::validate() const {
  auto fail = [](const std::string& field) {
    throw ParameterError("invalid intrinsics: " + field);
  };
  if (!(fx > 0.0) || !std::isfinite(fx)) fail("fx");
  if (!(fy > 0.0) || !std::isfinite(fy)) fail("fy");
  if (width <= 0) fail("width");
  if (height <= 0) fail("height");
  if (!(cx > 0.0 && cx < width)) fail("cx");
  if (!(cy > 0.0 && cy < height)) fail("cy");
}

PinholeIntrinsics PinholeIntrinsics::downsampled() const {
  PinholeIntrinsics k;
  k.fx = fx * 0.5;
  k.fy = fy * 0.5;
  // coarse pixel i covers fine pixels 2i, 2i+1 whose centers average to 2i+0.5
  k.cx = (cx - 0.5) * 0.5;
  k.cy = (cy - 0.5) * 0.5;
  k.width = width / 2;
  k.height = height / 2;
  return k;
}

RigidTransform RigidTransform::from_quaternion(const Vec3& t, const Eigen::Quaterniond& q) {
  return {q.normalized().toRotationMatrix(), t};
}

Eigen::Quaterniond RigidTransform::quaternion() const {
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

bool RigidTransform::is_valid(double tol) const {
  if (!R.allFinite() || !t.allFinite()) return false;
  if (((R.transpose() * R) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(R.determinant() - 1.0) <= tol;
}

Mat3 skew(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return m;
}

Pixel project(const Vec3& point, const PinholeIntrinsics& K) {
  if (!(point.z() > 0.0)) {
    std::ostringstream os;
    os << "point with z=" << point.z() << " is not projectable";
    throw NonProjectableError(os.str());
  }
  return {K.fx * point.x() / point.z() + K.cx, K.fy * point.y() / point.z() + K.cy};
}

Vec3 backproject(const Pixel& p, double depth, const PinholeIntrinsics& K) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    std::ostringstream os;
    os << "invalid depth " << depth;
    throw InvalidDepthError(os.str());
  }
  return {(p.u - K.cx) * depth / K.fx, (p.v - K.cy) * depth / K.fy, depth};
}

namespace {

// (1 - cos theta) / theta^2 without the cancellation of the direct form
double half_angle_coef(double theta) {
  const double s = std::sin(0.5 * theta) / theta;
  return 2.0 * s * s;
}

}  // namespace

Mat3 so3_exp(const Vec3& w) {
  const double theta = w.norm();
  const Mat3 W = skew(w);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + W + 0.5 * W * W;
  }
  return Mat3::Identity() + (std::sin(theta) / theta) * W + half_angle_coef(theta) * W * W;
}

Vec3 so3_log(const Mat3& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const Vec3 vec = q.vec();
  const double n = vec.norm();
  if (n < 1e-12) {
    return 2.0 * vec / q.w();
  }
  return 2.0 * std::atan2(n, q.w()) * vec / n;
}

double rotation_angle(const Mat3& R) { return so3_log(R).norm(); }

RigidTransform se3_exp(const Twist& xi) {
  const double theta = xi.w.norm();
  const Mat3 W = skew(xi.w);
  const Mat3 W2 = W * W;
  Mat3 V;
  RigidTransform T;
  if (theta < kSmallAngle) {
    T.R = Mat3::Identity() + W + 0.5 * W2;
    V = Mat3::Identity() + 0.5 * W + (1.0 / 6.0) * W2;
  } else {
    const double t2 = theta * theta;
    const double a = std::sin(theta) / theta;
    const double b = half_angle_coef(theta);
    // (theta - sin theta) / theta^3 cancels badly for small theta
    const double c = theta < 1e-2 ? 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 : (theta - std::sin(theta)) / (t2 * theta);
    T.R = Mat3::Identity() + a * W + b * W2;
    V = Mat3::Identity() + b * W + c * W2;
  }
  T.t = V * xi.v;
  return T;
}

Twist se3_log(const RigidTransform& T) {
  const Vec3 w = so3_log(T.R);
  const double theta = w.norm();
  const Mat3 W = skew(w);
  const Mat3 W2 = W * W;
  Mat3 V_inv;
  if (theta < kSmallAngle) {
    V_inv = Mat3::Identity() - 0.5 * W + (1.0 / 12.0) * W2;
  } else {
    const double half = 0.5 * theta;
    const double t2 = theta * theta;
    const double coef = theta < 1e-2 ? 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
                                     : (1.0 - half * std::cos(half) / std::sin(half)) / t2;
    V_inv = Mat3::Identity() - 0.5 * W + coef * W2;
  }
  return {V_inv * T.t, w};
}

std::optional<WarpResult> try_warp(const Pixel& x, double depth_a, const RigidTransform& T,
                                   const PinholeIntrinsics& K) {
  if (!(depth_a > 0.0) || !std::isfinite(depth_a)) return std::nullopt;
  const Vec3 pa = backproject(x, depth_a, K);
  if (T.is_identity()) {
    // identity warp returns the input pixel bit-exactly
    return WarpResult{x, depth_a, pa};
  }
  const Vec3 pb = T * pa;
  if (!(pb.z() > 0.0)) return std::nullopt;
  return WarpResult{project(pb, K), pb.z(), pb};
}

WarpResult warp_pixel(const Pixel& x, double depth_a, const Twist& xi, const PinholeIntrinsics& K) {
  if (!(depth_a > 0.0) || !std::isfinite(depth_a)) {
    throw InvalidDepthError("invalid depth in warp");
  }
  auto r = try_warp(x, depth_a, se3_exp(xi), K);
  if (!r) throw WarpBehindCameraError("warped point lies behind camera B");
  return *r;
}

}  // namespace flowfusion
