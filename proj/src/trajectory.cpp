#include "flowfusion/trajectory.hpp"

#include "flowfusion/error.hpp"

namespace flowfusion {

Trajectory::Trajectory(std::vector<TimedPose> poses) {
  poses_.reserve(poses.size());
  for (const auto& p : poses) push_back(p);
}

void Trajectory::push_back(const TimedPose& p) {
  if (!poses_.empty() && !(p.timestamp > poses_.back().timestamp)) {
    throw ParameterError("trajectory timestamps must be strictly increasing");
  }
  poses_.push_back(p);
}

Trajectory Trajectory::transformed(const RigidTransform& T) const {
  Trajectory out;
  out.poses_.reserve(poses_.size());
  for (const auto& p : poses_) out.poses_.push_back({p.timestamp, T * p.pose});
  return out;
}

}  // namespace flowfusion
