#include <doctest.h>

#include <lodom/error.hpp>
#include <lodom/ground_segmentation.hpp>
#include <lodom/synthlidar.hpp>
#include <test_support.hpp>

using namespace lodom;
using namespace lodom::testing;

TEST_CASE("flat ground is all ground") {
  SceneSpec flat;
  flat.ground_z = -1.8;
  const SensorModel sensor;
  const PointCloud scan = simulate_scan(flat, Pose::identity(), sensor);
  REQUIRE(!scan.empty());
  const GroundSegmentation g = ground_segment(scan, sensor);
  CHECK(g.ground_count() == scan.size());
  CHECK(g.cluster_count == 0);
  CHECK(g.rows == sensor.ring_count);
  CHECK(g.cols == sensor.columns());
}

TEST_CASE("a pole is one cluster") {
  SceneSpec s;
  s.ground_z = -1.8;
  SceneBox pole;
  pole.center = Vec3(6, 0, 0.7);  // straight ahead: only the front face is in view
  pole.half_extents = Vec3(0.15, 0.15, 2.5);
  s.boxes.push_back(pole);
  const SensorModel sensor;
  const PointCloud scan = simulate_scan(s, Pose::identity(), sensor);
  const GroundSegmentation g = ground_segment(scan, sensor);
  CHECK(g.cluster_count == 1);
  std::size_t on_pole = 0;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const bool pole_point = scan[i].xyz.z() > -1.7;
    on_pole += pole_point;
    if (pole_point) {
      CHECK(!g.ground[i]);
      CHECK(g.cluster_id[i] == 0);
    } else {
      CHECK(g.cluster_id[i] == -1);
    }
  }
  CHECK(on_pole >= 30);
  CHECK(g.clustered_count() == on_pole);
}

TEST_CASE("small floaters are discarded") {
  const SensorModel sensor;
  PointCloud scan;
  for (int c = 0; c < 3; ++c) {
    const double az = (100 + c) * sensor.azimuth_resolution_deg * kDeg;
    const double el = sensor.ring_elevation_deg(28) * kDeg;
    scan.points.emplace_back(Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)) * 8.0, 0.0f, 28);
  }
  const GroundSegmentation g = ground_segment(scan, sensor);
  CHECK(g.cluster_count == 0);
  for (const int id : g.cluster_id) CHECK(id == -1);
}

TEST_CASE("range image") {
  SceneSpec flat;
  flat.ground_z = -1.8;
  const SensorModel sensor;
  const PointCloud scan = simulate_scan(flat, Pose::identity(), sensor);
  const GroundSegmentation g = ground_segment(scan, sensor);
  std::size_t filled = 0;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      const long idx = g.pixel_point[static_cast<std::size_t>(r * g.cols + c)];
      if (idx < 0) {
        CHECK(std::isinf(g.range(r, c)));
      } else {
        ++filled;
        CHECK(std::abs(g.range(r, c) - scan[static_cast<std::size_t>(idx)].xyz.norm()) < 1e-12);
      }
    }
  CHECK(filled == scan.size());
}

TEST_CASE("needs rings") {
  const PointCloud c = PointCloud::from_positions(std::vector<Vec3>(3, Vec3(1, 0, 0)));
  CHECK_THROWS_AS(ground_segment(c, SensorModel{}), Error);
}
