#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <lodom/evaluation.hpp>
#include <lodom/geometry.hpp>
#include <lodom/sensor.hpp>
#include <lodom/trajectory.hpp>

namespace lodom {

/// Bounded rectangle center + a * u + b * v with |a| <= half_u, |b| <= half_v (u, v orthonormal).
struct ScenePlane {
  Vec3 center = Vec3::Zero();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  double half_u = 1.0;
  double half_v = 1.0;
  PointClass label = PointClass::other;
};

/// Box rotated by `yaw` about z. Moving boxes are displaced by `velocity` per frame.
struct SceneBox {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Ones();
  double yaw = 0.0;
  PointClass label = PointClass::other;
  Vec3 velocity = Vec3::Zero();  // meters per frame
  /// Buildings are the only sky blockers.
  bool building = false;

  Vec3 center_at(std::uint64_t frame) const { return center + static_cast<double>(frame) * velocity; }
};

struct SceneSpec {
  std::string name;
  /// Unbounded horizontal ground plane at this height, if any.
  std::optional<double> ground_z;
  std::vector<ScenePlane> planes;
  std::vector<SceneBox> boxes;
  std::uint64_t seed = 0;
};

/// Parses / prints the JSON form of a scene. Throws ErrorCode::schema_error on bad input.
SceneSpec parse_scene(std::string_view json);
std::string scene_to_json(const SceneSpec& s);

struct RayHit {
  double distance = 0.0;
  PointClass label = PointClass::other;
};

/// Nearest intersection of a ray (unit direction) with the scene at a given frame.
std::optional<RayHit> cast_ray(const SceneSpec& scene, const Vec3& origin, const Vec3& direction,
                               std::uint64_t frame = 0, double max_distance = 1e9);

/// Standard normal deviate that depends only on (seed, a, b, c).
double counter_gaussian(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c);

/// One revolution from `pose` (sensor to world). Points are in the sensor frame, ordered by
/// azimuth column then ring, each carrying its ring and the class of the surface hit. Range
/// noise is drawn from the scene seed, the frame number and the beam.
PointCloud simulate_scan(const SceneSpec& scene, const Pose& pose, const SensorModel& sensor,
                         std::uint64_t frame = 0);

/// Regular grid samples (spacing in meters) over every plane of the scene. Boxes and the
/// unbounded ground are not sampled.
PointCloud sample_planes(const SceneSpec& scene, double spacing);

enum class TrajectoryKind { static_pose, constant_velocity, turn };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::constant_velocity;
  int steps = 1;
  /// Per-step motion (constant_velocity) or per-step translation (turn).
  Twist step;
  /// Total heading change of a turn, radians, spread evenly over the steps.
  double turn_angle = 0.0;
  double dt = 0.1;
  Pose start;
};

/// The poses reached after each of `steps` motion steps, pose i = start * exp(step)^(i + 1) at
/// time (i + 1) * dt. The start pose itself is not included.
Trajectory generate_trajectory(const TrajectorySpec& spec);

/// Street canyon along x: contiguous buildings on both sides, poles on the sidewalks, and
/// `dynamic_count` cars and buses in the lanes.
struct CanyonParams {
  enum class Urbanization { low, high };
  Urbanization urbanization = Urbanization::low;
  int dynamic_count = 0;
  std::uint64_t seed = 0;
  double street_half_width = 10.0;  // building faces at y = +-street_half_width
  double half_length = 120.0;
  double ground_z = -1.8;

  double building_height() const { return urbanization == Urbanization::low ? 5.0 : 25.0; }
};

struct Canyon {
  SceneSpec scene;
  /// Analytic skymask seen from the street center at ground level.
  SkyMask skymask;
};

Canyon canyon_scene(const CanyonParams& p);

/// atan(H |sin a| / d) where the wall hit lies within the building run, 0 elsewhere.
SkyMask canyon_skymask(const CanyonParams& p, const Vec3& reference, int bins = 360);

/// Highest building elevation per azimuth seen from `reference`, found by bisection on
/// ray casts against building boxes.
SkyMask compute_skymask(const SceneSpec& scene, const Vec3& reference, int bins = 360);

/// Ground z = -1.5 and two walls at x = 4.5 and y = 3.5: three mutually perpendicular,
/// unequally sized rectangles around the origin.
SceneSpec three_plane_scene();

struct CorridorParams {
  double half_width = 2.5;
  double height = 3.0;
  double x_min = -10.0;
  double x_max = 50.0;
  double ground_z = -1.2;
  /// Pillars protruding from the walls at irregular spacing.
  int pillar_count = 12;
  std::uint64_t seed = 0;
};

SceneSpec corridor_scene(const CorridorParams& p);

/// Unbounded ground at ground_z with vertical poles scattered between 4 m and 25 m.
SceneSpec ground_poles_scene(int pole_count, std::uint64_t seed, double ground_z = -1.8);

/// Scene presets by name plus sensor and trajectory: everything needed to render a sequence.
struct ScenarioSpec {
  /// "three_plane", "corridor", "canyon", "ground_poles" or "custom".
  std::string preset = "corridor";
  SceneSpec scene;  // used by "custom"
  CanyonParams canyon;
  CorridorParams corridor;
  int pole_count = 20;
  SensorModel sensor;
  TrajectorySpec trajectory;
  int frames = 10;
  std::uint64_t seed = 0;
};

/// Throws ErrorCode::schema_error on bad input.
SensorModel parse_sensor(std::string_view json);
ScenarioSpec parse_scenario(std::string_view json);
std::string scenario_to_json(const ScenarioSpec& s);

/// The scene a scenario renders (presets are built with the scenario seed).
SceneSpec build_scene(const ScenarioSpec& s);

struct SyntheticSequence {
  SceneSpec scene;
  SensorModel sensor;
  std::vector<PointCloud> scans;
  Trajectory ground_truth;
  /// Per frame, from the sensor's ground position.
  std::vector<SkyMask> skymasks;
};

/// Frame 0 at the trajectory start pose, then `frames - 1` motion steps. Scan timestamps match
/// the ground-truth timestamps.
SyntheticSequence generate_sequence(const ScenarioSpec& s, bool with_skymasks = false);

}  // namespace lodom
