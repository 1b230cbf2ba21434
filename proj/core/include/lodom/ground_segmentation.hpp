#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include <lodom/geometry.hpp>
#include <lodom/sensor.hpp>

namespace lodom {

struct GroundParams {
  /// Maximum slope between vertically adjacent returns for both to count as ground, degrees.
  double ground_angle_deg = 10.0;
  /// Neighboring returns join a segment when the angle they subtend exceeds this, degrees.
  double cluster_angle_deg = 60.0;
  /// Segments at least this large are kept.
  int min_cluster_size = 30;
  /// Smaller segments are kept when they hold this many points over min_cluster_rows rows.
  int min_line_cluster_size = 5;
  int min_cluster_rows = 3;
};

/// Range-image segmentation of one organized scan.
struct GroundSegmentation {
  int rows = 0;
  int cols = 0;
  /// Row-major rows x cols ranges; +inf where the pixel holds no return.
  std::vector<double> range_image;
  /// Row-major pixel -> point index, -1 when empty.
  std::vector<long> pixel_point;
  /// Per point.
  std::vector<bool> ground;
  /// Per point; -1 for ground, discarded or unprojected points.
  std::vector<int> cluster_id;
  int cluster_count = 0;

  double range(int row, int col) const { return range_image[static_cast<std::size_t>(row * cols + col)]; }
  std::size_t ground_count() const;
  std::size_t clustered_count() const;
};

/// Projects a ring-organized scan onto the sensor's range image, flags ground from the slope
/// between adjacent rings below the horizon, and segments the rest by range-image connectivity.
/// Throws ErrorCode::unorganized_scan when a point has no ring.
GroundSegmentation ground_segment(const PointCloud& scan, const SensorModel& sensor, const GroundParams& gp = {});

}  // namespace lodom
