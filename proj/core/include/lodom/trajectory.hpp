#pragma once

#include <vector>

#include <lodom/geometry.hpp>

namespace lodom {

struct StampedPose {
  double timestamp = 0.0;  // seconds
  Pose pose;
};

/// Poses in time order; timestamps strictly increasing.
using Trajectory = std::vector<StampedPose>;

/// True when the timestamps are strictly increasing.
bool is_time_ordered(const Trajectory& t);

}  // namespace lodom
