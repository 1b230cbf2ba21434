#include <lodom/synthlidar.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <lodom/error.hpp>

#include "json_util.hpp"

namespace lodom {

namespace {

using namespace detail;
constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMinHit = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Uniform in [0, 1) from the top 53 bits.
double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

/// Platform-independent draws for scene placement (std distributions are not portable).
class Placement {
public:
  explicit Placement(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng_()); }
  int index(int n) { return std::min(n - 1, static_cast<int>(uniform(0.0, 1.0) * n)); }

private:
  std::mt19937_64 rng_;
};

std::optional<double> intersect_plane(const ScenePlane& pl, const Vec3& o, const Vec3& d) {
  const Vec3 n = pl.u.cross(pl.v);
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-12) {
    return std::nullopt;
  }
  const double t = n.dot(pl.center - o) / denom;
  if (!(t > kMinHit)) {
    return std::nullopt;
  }
  const Vec3 rel = o + t * d - pl.center;
  if (std::abs(pl.u.dot(rel)) > pl.half_u || std::abs(pl.v.dot(rel)) > pl.half_v) {
    return std::nullopt;
  }
  return t;
}

std::optional<double> intersect_box(const SceneBox& box, const Vec3& center, const Vec3& o, const Vec3& d) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  // Into the box frame: rotate by -yaw about z.
  auto local = [&](const Vec3& w) { return Vec3(c * w.x() + s * w.y(), -s * w.x() + c * w.y(), w.z()); };
  const Vec3 lo = local(o - center);
  const Vec3 ld = local(d);
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double h = box.half_extents(a);
    if (ld(a) == 0.0) {
      if (std::abs(lo(a)) > h) {
        return std::nullopt;
      }
      continue;
    }
    double t1 = (-h - lo(a)) / ld(a);
    double t2 = (h - lo(a)) / ld(a);
    if (t1 > t2) {
      std::swap(t1, t2);
    }
    t_enter = std::max(t_enter, t1);
    t_exit = std::min(t_exit, t2);
  }
  if (t_exit < t_enter || !(t_enter > kMinHit)) {
    return std::nullopt;  // miss, or the origin is inside the box
  }
  return t_enter;
}

const char* label_name(PointClass c) {
  switch (c) {
    case PointClass::car: return "car";
    case PointClass::bus: return "bus";
    default: return "other";
  }
}

PointClass label_from_name(const std::string& s) {
  if (s == "other") return PointClass::other;
  if (s == "car") return PointClass::car;
  if (s == "bus") return PointClass::bus;
  throw Error(ErrorCode::schema_error, "unknown class label '" + s + "'");
}

SceneSpec scene_from(const json& j) {
  check_keys(j, {"name", "ground_z", "planes", "boxes", "seed"}, "scene");
  SceneSpec s;
  s.name = get_or<std::string>(j, "name", "");
  s.seed = get_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("ground_z") && !j["ground_z"].is_null()) {
    s.ground_z = get_or<double>(j, "ground_z", 0.0);
  }
  if (j.contains("planes")) {
    for (const auto& pj : j["planes"]) {
      check_keys(pj, {"center", "u", "v", "half_u", "half_v", "label"}, "plane");
      ScenePlane p;
      p.center = vec_from(pj.at("center"), "plane.center");
      p.u = vec_from(pj.at("u"), "plane.u").normalized();
      p.v = vec_from(pj.at("v"), "plane.v").normalized();
      p.half_u = get_or<double>(pj, "half_u", 1.0);
      p.half_v = get_or<double>(pj, "half_v", 1.0);
      p.label = label_from_name(get_or<std::string>(pj, "label", "other"));
      if (std::abs(p.u.dot(p.v)) > 1e-9 || !(p.half_u > 0.0) || !(p.half_v > 0.0)) {
        throw Error(ErrorCode::schema_error, "plane axes must be orthogonal and extents positive");
      }
      s.planes.push_back(p);
    }
  }
  if (j.contains("boxes")) {
    for (const auto& bj : j["boxes"]) {
      check_keys(bj, {"center", "half_extents", "yaw", "label", "velocity", "building"}, "box");
      SceneBox b;
      b.center = vec_from(bj.at("center"), "box.center");
      b.half_extents = vec_from(bj.at("half_extents"), "box.half_extents");
      b.yaw = get_or<double>(bj, "yaw", 0.0);
      b.label = label_from_name(get_or<std::string>(bj, "label", "other"));
      if (bj.contains("velocity")) {
        b.velocity = vec_from(bj["velocity"], "box.velocity");
      }
      b.building = get_or<bool>(bj, "building", false);
      if (!(b.half_extents.minCoeff() > 0.0)) {
        throw Error(ErrorCode::schema_error, "box half extents must be positive");
      }
      s.boxes.push_back(b);
    }
  }
  return s;
}

json scene_json(const SceneSpec& s) {
  json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  if (s.ground_z) {
    j["ground_z"] = *s.ground_z;
  }
  j["planes"] = json::array();
  for (const auto& p : s.planes) {
    j["planes"].push_back({{"center", vec_to(p.center)},
                           {"u", vec_to(p.u)},
                           {"v", vec_to(p.v)},
                           {"half_u", p.half_u},
                           {"half_v", p.half_v},
                           {"label", label_name(p.label)}});
  }
  j["boxes"] = json::array();
  for (const auto& b : s.boxes) {
    j["boxes"].push_back({{"center", vec_to(b.center)},
                          {"half_extents", vec_to(b.half_extents)},
                          {"yaw", b.yaw},
                          {"label", label_name(b.label)},
                          {"velocity", vec_to(b.velocity)},
                          {"building", b.building}});
  }
  return j;
}

}  // namespace

SceneSpec parse_scene(std::string_view text) {
  try {
    return scene_from(parse_json(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema_error, std::string("scene: ") + e.what());
  }
}

std::string scene_to_json(const SceneSpec& s) { return scene_json(s).dump(2); }

std::optional<RayHit> cast_ray(const SceneSpec& scene, const Vec3& origin, const Vec3& direction,
                               std::uint64_t frame, double max_distance) {
  std::optional<RayHit> best;
  auto consider = [&](double t, PointClass label) {
    if (t <= max_distance && (!best || t < best->distance)) {
      best = RayHit{t, label};
    }
  };
  if (scene.ground_z && direction.z() != 0.0) {
    const double t = (*scene.ground_z - origin.z()) / direction.z();
    if (t > kMinHit) {
      consider(t, PointClass::other);
    }
  }
  for (const auto& pl : scene.planes) {
    if (const auto t = intersect_plane(pl, origin, direction)) {
      consider(*t, pl.label);
    }
  }
  for (const auto& box : scene.boxes) {
    if (const auto t = intersect_box(box, box.center_at(frame), origin, direction)) {
      consider(*t, box.label);
    }
  }
  return best;
}

double counter_gaussian(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const std::uint64_t k = splitmix64(splitmix64(splitmix64(seed ^ 0x5EEDull) ^ a) ^ b) ^ c;
  const double u1 = 1.0 - unit_uniform(splitmix64(k));  // (0, 1]
  const double u2 = unit_uniform(splitmix64(k ^ 0xA5A5A5A5A5A5A5A5ull));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

PointCloud simulate_scan(const SceneSpec& scene, const Pose& pose, const SensorModel& sensor, std::uint64_t frame) {
  sensor.validate();
  const int cols = sensor.columns();
  std::vector<Vec3> ring_dirs(static_cast<std::size_t>(sensor.ring_count));
  std::vector<double> cos_el(static_cast<std::size_t>(sensor.ring_count));
  std::vector<double> sin_el(static_cast<std::size_t>(sensor.ring_count));
  for (int r = 0; r < sensor.ring_count; ++r) {
    const double el = sensor.ring_elevation_deg(r) * kDeg;
    cos_el[static_cast<std::size_t>(r)] = std::cos(el);
    sin_el[static_cast<std::size_t>(r)] = std::sin(el);
  }
  PointCloud cloud;
  cloud.frame_id = "sensor";
  cloud.points.reserve(static_cast<std::size_t>(cols * sensor.ring_count) / 2);
  for (int c = 0; c < cols; ++c) {
    const double az = sensor.column_azimuth_deg(c) * kDeg;
    const double ca = std::cos(az);
    const double sa = std::sin(az);
    for (int r = 0; r < sensor.ring_count; ++r) {
      const Vec3 d_sensor(cos_el[static_cast<std::size_t>(r)] * ca, cos_el[static_cast<std::size_t>(r)] * sa,
                          sin_el[static_cast<std::size_t>(r)]);
      const Vec3 d_world = pose.rotation * d_sensor;
      const auto hit = cast_ray(scene, pose.translation, d_world, frame, sensor.max_range);
      if (!hit || hit->distance < sensor.min_range) {
        continue;
      }
      double range = hit->distance;
      if (sensor.range_noise_sigma > 0.0) {
        range += sensor.range_noise_sigma *
                 counter_gaussian(scene.seed, frame, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(c));
      }
      cloud.points.emplace_back(range * d_sensor, 0.0f, r, static_cast<std::int32_t>(hit->label));
    }
  }
  return cloud;
}

PointCloud sample_planes(const SceneSpec& scene, double spacing) {
  if (!(spacing > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "sample spacing must be positive");
  }
  PointCloud cloud;
  cloud.frame_id = "world";
  for (const auto& pl : scene.planes) {
    const int nu = static_cast<int>(std::floor(2.0 * pl.half_u / spacing + 1e-9));
    const int nv = static_cast<int>(std::floor(2.0 * pl.half_v / spacing + 1e-9));
    for (int i = 0; i <= nu; ++i) {
      for (int k = 0; k <= nv; ++k) {
        const Vec3 p = pl.center + (-pl.half_u + i * spacing) * pl.u + (-pl.half_v + k * spacing) * pl.v;
        cloud.points.emplace_back(p, 0.0f, -1, static_cast<std::int32_t>(pl.label));
      }
    }
  }
  return cloud;
}

Trajectory generate_trajectory(const TrajectorySpec& spec) {
  if (spec.steps < 1) {
    throw Error(ErrorCode::invalid_argument, "trajectory needs at least one step");
  }
  Twist step;
  switch (spec.kind) {
    case TrajectoryKind::static_pose: break;
    case TrajectoryKind::constant_velocity: step = spec.step; break;
    case TrajectoryKind::turn:
      step = Twist(spec.step.v, Vec3(0.0, 0.0, spec.turn_angle / spec.steps));
      break;
  }
  const Pose delta = se3_exp(step);
  Trajectory out;
  out.reserve(static_cast<std::size_t>(spec.steps));
  Pose current = spec.start;
  for (int i = 0; i < spec.steps; ++i) {
    current = se3_compose(current, delta);
    out.push_back({(i + 1) * spec.dt, current});
  }
  return out;
}

Canyon canyon_scene(const CanyonParams& p) {
  Canyon out;
  SceneSpec& s = out.scene;
  s.name = "canyon";
  s.seed = p.seed;
  s.ground_z = p.ground_z;
  const double H = p.building_height();
  const double depth = 15.0;
  const double block = 20.0;
  const int blocks = static_cast<int>(std::ceil(2.0 * p.half_length / block));
  const double run = blocks * block;
  for (int side = -1; side <= 1; side += 2) {
    for (int b = 0; b < blocks; ++b) {
      SceneBox box;
      box.center = Vec3(-run / 2.0 + (b + 0.5) * block, side * (p.street_half_width + depth / 2.0), p.ground_z + H / 2.0);
      box.half_extents = Vec3(block / 2.0, depth / 2.0, H / 2.0);
      box.building = true;
      s.boxes.push_back(box);
    }
  }

  Placement rng(p.seed);
  // Sidewalk poles at irregular spacing: structure along the street direction.
  for (int side = -1; side <= 1; side += 2) {
    double x = -p.half_length + rng.uniform(2.0, 8.0);
    while (x < p.half_length) {
      SceneBox pole;
      pole.center = Vec3(x, side * (p.street_half_width - 1.5), p.ground_z + 3.0);
      pole.half_extents = Vec3(0.15, 0.15, 3.0);
      s.boxes.push_back(pole);
      x += rng.uniform(6.0, 14.0);
    }
  }
  // Ground-floor storefronts jutting from the facades. Not buildings, so the skymask is unaffected.
  for (int side = -1; side <= 1; side += 2) {
    double x = -p.half_length + rng.uniform(0.0, 6.0);
    while (x < p.half_length) {
      const double len = rng.uniform(2.0, 6.0);
      const double depth_out = rng.uniform(0.3, 0.9);
      const double height = rng.uniform(2.5, 4.0);
      SceneBox front;
      front.center = Vec3(x + len / 2.0, side * (p.street_half_width - depth_out / 2.0), p.ground_z + height / 2.0);
      front.half_extents = Vec3(len / 2.0, depth_out / 2.0, height / 2.0);
      s.boxes.push_back(front);
      x += len + rng.uniform(3.0, 10.0);
    }
  }
  // Street trees between the poles: trunk plus canopy.
  for (int side = -1; side <= 1; side += 2) {
    double x = -p.half_length + rng.uniform(3.0, 12.0);
    while (x < p.half_length) {
      const double y = side * (p.street_half_width - 2.0);
      const double trunk_h = rng.uniform(2.0, 3.0);
      const double canopy = rng.uniform(1.0, 2.0);
      SceneBox trunk;
      trunk.center = Vec3(x, y, p.ground_z + trunk_h / 2.0);
      trunk.half_extents = Vec3(0.2, 0.2, trunk_h / 2.0);
      s.boxes.push_back(trunk);
      SceneBox crown;
      crown.center = Vec3(x, y, p.ground_z + trunk_h + canopy);
      crown.half_extents = Vec3(canopy, std::min(canopy, 1.4), canopy);
      s.boxes.push_back(crown);
      x += rng.uniform(8.0, 16.0);
    }
  }

  const double lanes[4] = {-6.0, -2.0, 2.0, 6.0};
  std::vector<SceneBox> vehicles;
  for (int v = 0; v < p.dynamic_count; ++v) {
    const bool bus = rng.uniform(0.0, 1.0) < 0.3;
    SceneBox car;
    car.label = bus ? PointClass::bus : PointClass::car;
    car.half_extents = bus ? Vec3(6.0, 1.25, 1.6) : Vec3(2.25, 0.9, 0.75);
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double lane = lanes[rng.index(4)];
      car.center = Vec3(rng.uniform(-40.0, 60.0), lane, p.ground_z + car.half_extents.z());
      const double speed = rng.uniform(0.3, 1.2);
      car.velocity = Vec3(lane < 0.0 ? speed : -speed, 0.0, 0.0);
      const bool overlaps = std::any_of(vehicles.begin(), vehicles.end(), [&](const SceneBox& o) {
        return o.center.y() == car.center.y() &&
               std::abs(o.center.x() - car.center.x()) < o.half_extents.x() + car.half_extents.x() + 2.0;
      });
      if (!overlaps) {
        break;
      }
    }
    vehicles.push_back(car);
  }
  s.boxes.insert(s.boxes.end(), vehicles.begin(), vehicles.end());

  CanyonParams analytic = p;
  analytic.half_length = run / 2.0;
  out.skymask = canyon_skymask(analytic, Vec3(0.0, 0.0, p.ground_z));
  return out;
}

SkyMask canyon_skymask(const CanyonParams& p, const Vec3& reference, int bins) {
  SkyMask m;
  const double top = p.ground_z + p.building_height() - reference.z();
  for (int k = 0; k < bins; ++k) {
    const double az_deg = 360.0 * k / bins;
    const double az = az_deg * kDeg;
    double el = 0.0;
    const double sy = std::sin(az);
    if (std::abs(sy) > 1e-12 && top > 0.0) {
      const double wall_y = sy > 0.0 ? p.street_half_width : -p.street_half_width;
      const double s = (wall_y - reference.y()) / sy;
      const double x_hit = reference.x() + s * std::cos(az);
      if (s > 0.0 && std::abs(x_hit) <= p.half_length) {
        el = std::atan(top / s) / kDeg;
      }
    }
    m.azimuth_deg.push_back(az_deg);
    m.elevation_deg.push_back(el);
  }
  return m;
}

SkyMask compute_skymask(const SceneSpec& scene, const Vec3& reference, int bins) {
  SceneSpec blockers;
  for (const auto& b : scene.boxes) {
    if (b.building) {
      blockers.boxes.push_back(b);
    }
  }
  auto blocked = [&](double az, double el) {
    const Vec3 d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    return cast_ray(blockers, reference, d).has_value();
  };
  SkyMask m;
  for (int k = 0; k < bins; ++k) {
    const double az_deg = 360.0 * k / bins;
    const double az = az_deg * kDeg;
    double el = 0.0;
    if (blocked(az, 1e-9)) {
      double lo = 1e-9;
      double hi = std::numbers::pi / 2.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (blocked(az, mid) ? lo : hi) = mid;
      }
      el = lo / kDeg;
    }
    m.azimuth_deg.push_back(az_deg);
    m.elevation_deg.push_back(el);
  }
  return m;
}

SceneSpec three_plane_scene() {
  SceneSpec s;
  s.name = "three_plane";
  // Ground: x in [-5.5, 4.5], y in [-5.5, 3.5] at z = -1.5.
  s.planes.push_back({Vec3(-0.5, -1.0, -1.5), Vec3::UnitX(), Vec3::UnitY(), 5.0, 4.5, PointClass::other});
  // Wall x = 4.5: y in [-5.5, 3.5], z in [-1.5, 2.5].
  s.planes.push_back({Vec3(4.5, -1.0, 0.5), Vec3::UnitY(), Vec3::UnitZ(), 4.5, 2.0, PointClass::other});
  // Wall y = 3.5: x in [-5.5, 4.5], z in [-1.5, 1.5].
  s.planes.push_back({Vec3(-0.5, 3.5, 0.0), Vec3::UnitZ(), Vec3::UnitX(), 1.5, 5.0, PointClass::other});
  return s;
}

SceneSpec corridor_scene(const CorridorParams& p) {
  SceneSpec s;
  s.name = "corridor";
  s.seed = p.seed;
  const double cx = 0.5 * (p.x_min + p.x_max);
  const double hx = 0.5 * (p.x_max - p.x_min);
  const double cz = p.ground_z + 0.5 * p.height;
  const double hz = 0.5 * p.height;
  s.planes.push_back({Vec3(cx, 0.0, p.ground_z), Vec3::UnitX(), Vec3::UnitY(), hx, p.half_width, PointClass::other});
  s.planes.push_back({Vec3(cx, p.half_width, cz), Vec3::UnitX(), Vec3::UnitZ(), hx, hz, PointClass::other});
  s.planes.push_back({Vec3(cx, -p.half_width, cz), Vec3::UnitX(), Vec3::UnitZ(), hx, hz, PointClass::other});
  s.planes.push_back({Vec3(p.x_min, 0.0, cz), Vec3::UnitY(), Vec3::UnitZ(), p.half_width, hz, PointClass::other});
  s.planes.push_back({Vec3(p.x_max, 0.0, cz), Vec3::UnitY(), Vec3::UnitZ(), p.half_width, hz, PointClass::other});
  Placement rng(p.seed);
  for (int i = 0; i < p.pillar_count; ++i) {
    SceneBox pillar;
    const double side = rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    pillar.center = Vec3(rng.uniform(p.x_min + 1.0, p.x_max - 1.0), side * (p.half_width - 0.2), cz);
    pillar.half_extents = Vec3(0.2, 0.2, hz);
    s.boxes.push_back(pillar);
  }
  return s;
}

SceneSpec ground_poles_scene(int pole_count, std::uint64_t seed, double ground_z) {
  SceneSpec s;
  s.name = "ground_poles";
  s.seed = seed;
  s.ground_z = ground_z;
  Placement rng(seed);
  for (int i = 0; i < pole_count; ++i) {
    const double r = rng.uniform(4.0, 25.0);
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double h = rng.uniform(3.0, 5.0);
    SceneBox pole;
    pole.center = Vec3(r * std::cos(a), r * std::sin(a), ground_z + h / 2.0);
    pole.half_extents = Vec3(0.15, 0.15, h / 2.0);
    s.boxes.push_back(pole);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Scenarios

namespace {

SensorModel sensor_from(const json& j) {
  check_keys(j, {"ring_count", "vertical_min_deg", "vertical_max_deg", "azimuth_resolution_deg", "min_range",
                 "max_range", "range_noise_sigma"},
             "sensor");
  SensorModel s;
  s.ring_count = get_or<int>(j, "ring_count", s.ring_count);
  s.vertical_min_deg = get_or<double>(j, "vertical_min_deg", s.vertical_min_deg);
  s.vertical_max_deg = get_or<double>(j, "vertical_max_deg", s.vertical_max_deg);
  s.azimuth_resolution_deg = get_or<double>(j, "azimuth_resolution_deg", s.azimuth_resolution_deg);
  s.min_range = get_or<double>(j, "min_range", s.min_range);
  s.max_range = get_or<double>(j, "max_range", s.max_range);
  s.range_noise_sigma = get_or<double>(j, "range_noise_sigma", s.range_noise_sigma);
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::schema_error, e.what());
  }
  return s;
}

json sensor_json(const SensorModel& s) {
  return {{"ring_count", s.ring_count},
          {"vertical_min_deg", s.vertical_min_deg},
          {"vertical_max_deg", s.vertical_max_deg},
          {"azimuth_resolution_deg", s.azimuth_resolution_deg},
          {"min_range", s.min_range},
          {"max_range", s.max_range},
          {"range_noise_sigma", s.range_noise_sigma}};
}

TrajectorySpec trajectory_from(const json& j) {
  check_keys(j, {"kind", "step_v", "step_w", "turn_angle_deg", "dt", "start_xyz", "start_yaw_deg"}, "trajectory");
  TrajectorySpec t;
  const auto kind = get_or<std::string>(j, "kind", "constant_velocity");
  if (kind == "static") {
    t.kind = TrajectoryKind::static_pose;
  } else if (kind == "constant_velocity") {
    t.kind = TrajectoryKind::constant_velocity;
  } else if (kind == "turn") {
    t.kind = TrajectoryKind::turn;
  } else {
    throw Error(ErrorCode::schema_error, "unknown trajectory kind '" + kind + "'");
  }
  if (j.contains("step_v")) t.step.v = vec_from(j["step_v"], "trajectory.step_v");
  if (j.contains("step_w")) t.step.w = vec_from(j["step_w"], "trajectory.step_w");
  t.turn_angle = get_or<double>(j, "turn_angle_deg", 0.0) * kDeg;
  t.dt = get_or<double>(j, "dt", 0.1);
  if (!(t.dt > 0.0)) {
    throw Error(ErrorCode::schema_error, "trajectory.dt must be positive");
  }
  Vec3 start = Vec3::Zero();
  if (j.contains("start_xyz")) start = vec_from(j["start_xyz"], "trajectory.start_xyz");
  t.start = Pose::from_axis_angle(Vec3::UnitZ(), get_or<double>(j, "start_yaw_deg", 0.0) * kDeg, start);
  return t;
}

json trajectory_json(const TrajectorySpec& t) {
  const char* kind = t.kind == TrajectoryKind::static_pose ? "static"
                     : t.kind == TrajectoryKind::turn      ? "turn"
                                                           : "constant_velocity";
  const double yaw = std::atan2(t.start.rotation(1, 0), t.start.rotation(0, 0));
  return {{"kind", kind},
          {"step_v", vec_to(t.step.v)},
          {"step_w", vec_to(t.step.w)},
          {"turn_angle_deg", t.turn_angle / kDeg},
          {"dt", t.dt},
          {"start_xyz", vec_to(t.start.translation)},
          {"start_yaw_deg", yaw / kDeg}};
}

}  // namespace

SensorModel parse_sensor(std::string_view text) { return sensor_from(parse_json(text)); }

ScenarioSpec parse_scenario(std::string_view text) {
  try {
    const json j = parse_json(text);
    check_keys(j, {"preset", "scene", "canyon", "corridor", "pole_count", "sensor", "trajectory", "frames", "seed"},
               "scenario");
    ScenarioSpec s;
    s.preset = get_or<std::string>(j, "preset", "corridor");
    if (s.preset != "three_plane" && s.preset != "corridor" && s.preset != "canyon" && s.preset != "ground_poles" &&
        s.preset != "custom") {
      throw Error(ErrorCode::schema_error, "unknown scene preset '" + s.preset + "'");
    }
    if (j.contains("scene")) {
      s.scene = scene_from(j["scene"]);
    } else if (s.preset == "custom") {
      throw Error(ErrorCode::schema_error, "preset 'custom' needs a scene");
    }
    if (j.contains("canyon")) {
      const auto& c = j["canyon"];
      check_keys(c, {"urbanization", "dynamic_count", "street_half_width", "half_length", "ground_z"}, "canyon");
      const auto u = get_or<std::string>(c, "urbanization", "low");
      if (u != "low" && u != "high") {
        throw Error(ErrorCode::schema_error, "canyon.urbanization must be 'low' or 'high'");
      }
      s.canyon.urbanization = u == "low" ? CanyonParams::Urbanization::low : CanyonParams::Urbanization::high;
      s.canyon.dynamic_count = get_or<int>(c, "dynamic_count", 0);
      s.canyon.street_half_width = get_or<double>(c, "street_half_width", s.canyon.street_half_width);
      s.canyon.half_length = get_or<double>(c, "half_length", s.canyon.half_length);
      s.canyon.ground_z = get_or<double>(c, "ground_z", s.canyon.ground_z);
      if (s.canyon.dynamic_count < 0) {
        throw Error(ErrorCode::schema_error, "canyon.dynamic_count must be non-negative");
      }
    }
    if (j.contains("corridor")) {
      const auto& c = j["corridor"];
      check_keys(c, {"half_width", "height", "x_min", "x_max", "ground_z", "pillar_count"}, "corridor");
      s.corridor.half_width = get_or<double>(c, "half_width", s.corridor.half_width);
      s.corridor.height = get_or<double>(c, "height", s.corridor.height);
      s.corridor.x_min = get_or<double>(c, "x_min", s.corridor.x_min);
      s.corridor.x_max = get_or<double>(c, "x_max", s.corridor.x_max);
      s.corridor.ground_z = get_or<double>(c, "ground_z", s.corridor.ground_z);
      s.corridor.pillar_count = get_or<int>(c, "pillar_count", s.corridor.pillar_count);
    }
    s.pole_count = get_or<int>(j, "pole_count", s.pole_count);
    if (j.contains("sensor")) {
      s.sensor = sensor_from(j["sensor"]);
    }
    if (j.contains("trajectory")) {
      s.trajectory = trajectory_from(j["trajectory"]);
    }
    s.frames = get_or<int>(j, "frames", s.frames);
    s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
    if (s.frames < 1) {
      throw Error(ErrorCode::schema_error, "frames must be at least 1");
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema_error, std::string("scenario: ") + e.what());
  }
}

std::string scenario_to_json(const ScenarioSpec& s) {
  json j;
  j["preset"] = s.preset;
  if (s.preset == "custom") {
    j["scene"] = scene_json(s.scene);
  }
  j["canyon"] = {{"urbanization", s.canyon.urbanization == CanyonParams::Urbanization::low ? "low" : "high"},
                 {"dynamic_count", s.canyon.dynamic_count},
                 {"street_half_width", s.canyon.street_half_width},
                 {"half_length", s.canyon.half_length},
                 {"ground_z", s.canyon.ground_z}};
  j["corridor"] = {{"half_width", s.corridor.half_width}, {"height", s.corridor.height},
                   {"x_min", s.corridor.x_min},           {"x_max", s.corridor.x_max},
                   {"ground_z", s.corridor.ground_z},     {"pillar_count", s.corridor.pillar_count}};
  j["pole_count"] = s.pole_count;
  j["sensor"] = sensor_json(s.sensor);
  j["trajectory"] = trajectory_json(s.trajectory);
  j["frames"] = s.frames;
  j["seed"] = s.seed;
  return j.dump(2);
}

SceneSpec build_scene(const ScenarioSpec& s) {
  if (s.preset == "three_plane") {
    return three_plane_scene();
  }
  if (s.preset == "corridor") {
    CorridorParams c = s.corridor;
    c.seed = s.seed;
    return corridor_scene(c);
  }
  if (s.preset == "canyon") {
    CanyonParams c = s.canyon;
    c.seed = s.seed;
    return canyon_scene(c).scene;
  }
  if (s.preset == "ground_poles") {
    return ground_poles_scene(s.pole_count, s.seed);
  }
  SceneSpec scene = s.scene;
  scene.seed = s.seed;
  return scene;
}

SyntheticSequence generate_sequence(const ScenarioSpec& s, bool with_skymasks) {
  SyntheticSequence seq;
  seq.scene = build_scene(s);
  seq.sensor = s.sensor;
  seq.ground_truth.push_back({0.0, s.trajectory.start});
  if (s.frames > 1) {
    TrajectorySpec t = s.trajectory;
    t.steps = s.frames - 1;
    const Trajectory rest = generate_trajectory(t);
    seq.ground_truth.insert(seq.ground_truth.end(), rest.begin(), rest.end());
  }
  const double ground = seq.scene.ground_z.value_or(0.0);
  for (std::size_t k = 0; k < seq.ground_truth.size(); ++k) {
    PointCloud scan = simulate_scan(seq.scene, seq.ground_truth[k].pose, s.sensor, k);
    scan.timestamp = seq.ground_truth[k].timestamp;
    seq.scans.push_back(std::move(scan));
    if (with_skymasks) {
      Vec3 ref = seq.ground_truth[k].pose.translation;
      ref.z() = ground;
      seq.skymasks.push_back(compute_skymask(seq.scene, ref));
    }
  }
  return seq;
}

}  // namespace lodom
