#pragma once

#include <vector>

#include "flowfusion/geometry.hpp"

namespace flowfusion {

struct TimedPose {
  double timestamp = 0.0;
  /// Camera-to-world transform (the TUM file convention).
  RigidTransform pose;
};

/// Timestamped camera poses in a world frame; timestamps strictly increasing.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<TimedPose> poses);

  /// Appends a pose; throws ParameterError when the timestamp does not increase.
  void push_back(const TimedPose& p);
  std::size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }
  const TimedPose& operator[](std::size_t i) const { return poses_[i]; }
  const std::vector<TimedPose>& poses() const { return poses_; }
  auto begin() const { return poses_.begin(); }
  auto end() const { return poses_.end(); }

  /// Left-composes every pose with T (changes the world frame).
  Trajectory transformed(const RigidTransform& T) const;

 private:
  std::vector<TimedPose> poses_;
};

}  // namespace flowfusion
