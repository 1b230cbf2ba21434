#include <doctest.h>

#include <lodom/error.hpp>
#include <lodom/evaluation.hpp>
#include <lodom/synthlidar.hpp>
#include <test_support.hpp>

using namespace lodom;
using namespace lodom::testing;

namespace {

SensorModel quiet_sensor() {
  SensorModel s;
  s.range_noise_sigma = 0.0;
  return s;
}

double plane_distance(const ScenePlane& p, const Vec3& x) {
  const Vec3 n = p.u.cross(p.v).normalized();
  return std::abs(n.dot(x - p.center));
}

}  // namespace

TEST_CASE("ground plane returns") {
  SceneSpec s;
  s.ground_z = -2.0;
  const PointCloud c = simulate_scan(s, Pose::identity(), quiet_sensor());
  REQUIRE(!c.empty());
  for (const auto& p : c.points) CHECK(std::abs(p.xyz.z() + 2.0) < 1e-9);
  for (const auto& p : c.points) CHECK(p.has_ring());
}

TEST_CASE("wall returns") {
  SceneSpec s;
  ScenePlane wall;
  wall.center = Vec3(10, 0, 0);
  wall.u = Vec3::UnitY();
  wall.v = Vec3::UnitZ();
  wall.half_u = 20;
  wall.half_v = 20;
  s.planes.push_back(wall);
  const PointCloud c = simulate_scan(s, Pose::identity(), quiet_sensor());
  REQUIRE(!c.empty());
  for (const auto& p : c.points) CHECK(std::abs(p.xyz.x() - 10.0) < 1e-9);
}

TEST_CASE("scans are in the sensor frame") {
  SceneSpec s;
  s.ground_z = -2.0;
  const Pose at = Pose::from_axis_angle(Vec3::UnitZ(), 0.7, Vec3(3, -4, 0.5));
  const PointCloud c = simulate_scan(s, at, quiet_sensor());
  for (const auto& p : c.points) CHECK(std::abs((at * p.xyz).z() + 2.0) < 1e-9);
}

TEST_CASE("points lie on scene surfaces") {
  const SceneSpec s = three_plane_scene();
  const PointCloud c = simulate_scan(s, Pose::from_translation(0.5, -0.3, 0.2), quiet_sensor());
  REQUIRE(!c.empty());
  for (const auto& p : c.points) {
    const Vec3 w = Pose::from_translation(0.5, -0.3, 0.2) * p.xyz;
    double best = std::abs(w.z() - *s.ground_z);
    for (const auto& pl : s.planes) best = std::min(best, plane_distance(pl, w));
    CHECK(best < 1e-9);
  }
}

TEST_CASE("same seed, same scan") {
  ScenarioSpec s;
  s.preset = "canyon";
  s.canyon.dynamic_count = 10;
  s.frames = 2;
  s.seed = 42;
  s.sensor.range_noise_sigma = 0.02;
  const auto a = generate_sequence(s), b = generate_sequence(s);
  for (std::size_t k = 0; k < 2; ++k) {
    REQUIRE(a.scans[k].size() == b.scans[k].size());
    for (std::size_t i = 0; i < a.scans[k].size(); ++i) {
      CHECK(a.scans[k][i].xyz == b.scans[k][i].xyz);
      CHECK(a.scans[k][i].label == b.scans[k][i].label);
    }
  }
  s.seed = 43;
  const auto c = generate_sequence(s);
  CHECK(c.scans[0].points.front().xyz != a.scans[0].points.front().xyz);
  CHECK(counter_gaussian(1, 2, 3, 4) == counter_gaussian(1, 2, 3, 4));
  CHECK(counter_gaussian(1, 2, 3, 4) != counter_gaussian(1, 2, 3, 5));
}

TEST_CASE("rigidly related scans of a static scene") {
  const SceneSpec s = three_plane_scene();
  const Pose P = Pose::from_translation(0.2, 0.1, 0.0);
  const Pose dT = Pose::from_axis_angle(Vec3::UnitZ(), 0.05, Vec3(0.3, 0, 0));
  const PointCloud a = simulate_scan(s, P, quiet_sensor());
  const PointCloud b = simulate_scan(s, se3_compose(P, dT), quiet_sensor());
  // Every point of b, moved by dT, lies on the surfaces a sees.
  for (const auto& p : b.points) {
    const Vec3 in_a = dT * p.xyz;
    const Vec3 w = P * in_a;
    double best = std::abs(w.z() - *s.ground_z);
    for (const auto& pl : s.planes) best = std::min(best, plane_distance(pl, w));
    CHECK(best < 1e-9);
  }
  CHECK(!a.empty());
}

TEST_CASE("trajectories") {
  TrajectorySpec t;
  t.kind = TrajectoryKind::static_pose;
  t.steps = 10;
  const Trajectory still = generate_trajectory(t);
  REQUIRE(still.size() == 10);
  for (const auto& p : still) CHECK(pose_distance(p.pose, Pose::identity()) == 0.0);

  t.kind = TrajectoryKind::constant_velocity;
  t.steps = 5;
  t.step = Twist(Vec3(1, 0, 0), Vec3::Zero());
  const Trajectory line = generate_trajectory(t);
  CHECK((line.back().pose.translation - Vec3(5, 0, 0)).norm() < 1e-12);
  CHECK(line.back().timestamp == doctest::Approx(0.5));
  CHECK(is_time_ordered(line));

  t.kind = TrajectoryKind::turn;
  t.steps = 9;
  t.turn_angle = std::numbers::pi / 2;
  const Trajectory turn = generate_trajectory(t);
  CHECK(pose_distance(Pose(turn.back().pose.rotation, Vec3::Zero()), Pose::rot_z(std::numbers::pi / 2)) < 1e-9);
}

TEST_CASE("canyon skymask") {
  CanyonParams low;
  low.urbanization = CanyonParams::Urbanization::low;
  const Canyon c = canyon_scene(low);
  REQUIRE(c.skymask.size() == 360);
  CHECK(c.skymask.elevation_deg[90] == doctest::Approx(std::atan(0.5) / kDeg).epsilon(1e-12));
  CHECK(c.skymask.elevation_deg[0] == 0.0);
  CHECK(c.skymask.elevation_deg[180] == 0.0);
  double sum = 0.0;
  for (const double e : c.skymask.elevation_deg) sum += e;
  CHECK(skymask_mea(c.skymask) == doctest::Approx(sum / 360.0).epsilon(1e-14));
  CanyonParams high = low;
  high.urbanization = CanyonParams::Urbanization::high;
  CHECK(skymask_mea(canyon_scene(high).skymask) > skymask_mea(c.skymask));
  for (const double e : canyon_scene(high).skymask.elevation_deg) {
    CHECK(e >= 0.0);
    CHECK(e <= 90.0);
  }
}

TEST_CASE("ray-cast skymask agrees with the analytic one") {
  CanyonParams p;
  const Canyon c = canyon_scene(p);
  const Vec3 ref(0, 0, p.ground_z);
  const SkyMask cast = compute_skymask(c.scene, ref, 72);
  const SkyMask analytic = canyon_skymask(p, ref, 72);
  for (std::size_t i = 0; i < cast.size(); ++i) CHECK(std::abs(cast.elevation_deg[i] - analytic.elevation_deg[i]) < 0.05);
}

TEST_CASE("dynamic objects") {
  ScenarioSpec s;
  s.preset = "canyon";
  s.frames = 2;
  s.canyon.dynamic_count = 0;
  const auto quiet = generate_sequence(s);
  for (const auto& scan : quiet.scans) CHECK(dynamic_density(LabelSet::from_cloud(scan)) == 0.0);
  s.canyon.dynamic_count = 20;
  const auto busy = generate_sequence(s);
  CHECK(dynamic_density(LabelSet::from_cloud(busy.scans[0])) > 0.0);
  std::size_t vehicles = 0;
  for (const auto& b : busy.scene.boxes) vehicles += b.label == PointClass::car || b.label == PointClass::bus;
  CHECK(vehicles == 20);
}

TEST_CASE("sequence timestamps match ground truth") {
  ScenarioSpec s;
  s.preset = "three_plane";
  s.frames = 4;
  const auto seq = generate_sequence(s, true);
  REQUIRE(seq.scans.size() == 4);
  REQUIRE(seq.ground_truth.size() == 4);
  REQUIRE(seq.skymasks.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(seq.scans[k].timestamp == seq.ground_truth[k].timestamp);
  CHECK(pose_distance(seq.ground_truth[0].pose, s.trajectory.start) == 0.0);
}

TEST_CASE("scene and scenario json") {
  const SceneSpec s = three_plane_scene();
  const SceneSpec back = parse_scene(scene_to_json(s));
  CHECK(back.planes.size() == s.planes.size());
  CHECK(scene_to_json(back) == scene_to_json(s));
  ScenarioSpec sc;
  sc.preset = "canyon";
  sc.canyon.dynamic_count = 7;
  sc.frames = 12;
  CHECK(scenario_to_json(parse_scenario(scenario_to_json(sc))) == scenario_to_json(sc));
  CHECK_THROWS_AS(parse_scenario(R"({"preset": "moon"})"), Error);
  CHECK_THROWS_AS(parse_scene(R"({"planes": [{"bogus": 1}]})"), Error);
  CHECK(parse_sensor(R"({"ring_count": 16})").ring_count == 16);
  CHECK_THROWS_AS(parse_sensor(R"({"ring_count": 1})"), Error);
}

TEST_CASE("default sensor layout") {
  const SensorModel s;
  CHECK(s.ring_count == 32);
  CHECK(s.vertical_max_deg - s.vertical_min_deg == 40.0);
  CHECK(s.ring_elevation_deg(0) == -25.0);
  CHECK(s.ring_elevation_deg(31) == doctest::Approx(15.0));
  CHECK(s.columns() == 900);
}
