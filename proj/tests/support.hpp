#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "flowfusion/synthetic.hpp"

namespace fftest {

using namespace flowfusion;

/// Back wall, floor and left wall; the camera drifts and yaws.
inline SyntheticSceneSpec room_spec(int frames = 3) {
  SyntheticSceneSpec s;
  s.planes = {{Vec3(0, 0, 1), 3.0}, {Vec3(0, 1, 0), 1.0}, {Vec3(1, 0, 0), -1.5}};
  s.frame_count = frames;
  s.camera_motion = Twist(Vec3(0.03, -0.01, 0.04).normalized() * 0.05, Vec3(0.01, 0.02, -0.01));
  return s;
}

/// room_spec plus a ~0.87 m box sliding along +x (~25% of frame 0).
inline SyntheticSceneSpec moving_box_spec(int frames = 3) {
  SyntheticSceneSpec s = room_spec(frames);
  s.object = BoxObject{Vec3(0.2, 0, 2.0), Vec3(0.87, 0.87, 0.87), Twist(Vec3(0.03, 0, 0), Vec3::Zero())};
  return s;
}

/// Quarter-resolution variant for tests that loop over many scenes.
inline SyntheticSceneSpec small(SyntheticSceneSpec s) {
  s.intrinsics = PinholeIntrinsics{125.0, 125.0, 79.5, 59.5, 160, 120};
  return s;
}

inline double translation_error(const Twist& est, const Twist& gt) {
  return (se3_exp(est) * se3_exp(gt).inverse()).t.norm();
}

inline double rotation_error_deg(const Twist& est, const Twist& gt) {
  return rotation_angle((se3_exp(est) * se3_exp(gt).inverse()).R) * 180.0 / 3.14159265358979323846;
}

inline double mask_iou(const Mask& a, const Mask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

inline Twist random_twist(std::mt19937_64& rng, double v_scale, double w_scale) {
  std::normal_distribution<double> n(0.0, 1.0);
  return {Vec3(n(rng), n(rng), n(rng)) * v_scale, Vec3(n(rng), n(rng), n(rng)) * w_scale};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("flowfusion_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fftest
