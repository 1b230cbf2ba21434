#pragma once

#include <cstdint>

namespace lodom {

/// Spinning multi-beam LiDAR layout. Rings are evenly spaced in elevation from
/// vertical_min_deg (ring 0) to vertical_max_deg (last ring).
struct SensorModel {
  int ring_count = 32;
  double vertical_min_deg = -25.0;
  double vertical_max_deg = 15.0;
  double azimuth_resolution_deg = 0.4;
  double min_range = 0.5;
  double max_range = 80.0;
  double range_noise_sigma = 0.0;

  /// Throws ErrorCode::invalid_argument for an unusable layout.
  void validate() const;

  double ring_elevation_deg(int ring) const;
  double ring_spacing_deg() const { return (vertical_max_deg - vertical_min_deg) / (ring_count - 1); }
  /// Number of azimuth bins in a full revolution.
  int columns() const;
  /// Azimuth of a column, degrees in [0, 360).
  double column_azimuth_deg(int column) const { return column * azimuth_resolution_deg; }
};

}  // namespace lodom
