#include <lodom/sensor.hpp>

#include <cmath>
#include <string>

#include <lodom/error.hpp>

namespace lodom {

void SensorModel::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) {
      throw Error(ErrorCode::invalid_argument, std::string("sensor model: ") + what);
    }
  };
  require(ring_count >= 2, "ring_count must be at least 2");
  require(vertical_max_deg > vertical_min_deg, "vertical field of view must be positive");
  require(vertical_min_deg >= -90.0 && vertical_max_deg <= 90.0, "elevations must lie in [-90, 90]");
  require(azimuth_resolution_deg > 0.0 && azimuth_resolution_deg <= 90.0, "azimuth resolution out of range");
  require(min_range >= 0.0 && max_range > min_range, "range limits out of order");
  require(range_noise_sigma >= 0.0, "range_noise_sigma must be non-negative");
}

double SensorModel::ring_elevation_deg(int ring) const {
  return vertical_min_deg + ring * ring_spacing_deg();
}

int SensorModel::columns() const {
  return static_cast<int>(std::lround(360.0 / azimuth_resolution_deg));
}

}  // namespace lodom
