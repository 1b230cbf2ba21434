#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <lodom/geometry.hpp>
#include <lodom/kdtree.hpp>

namespace lodom::testing {

constexpr double kDeg = std::numbers::pi / 180.0;

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Translation of length up to max_t along a random direction, rotation up to max_angle
/// about a random axis.
inline Pose random_pose(std::mt19937_64& rng, double max_t, double max_angle) {
  const Vec3 t = random_unit(rng) * uniform(rng, 0.0, max_t);
  return Pose::from_axis_angle(random_unit(rng), uniform(rng, 0.0, max_angle), t);
}

inline Twist random_twist(std::mt19937_64& rng, double max_v, double max_angle) {
  return Twist(random_unit(rng) * uniform(rng, 0.0, max_v), random_unit(rng) * uniform(rng, 0.0, max_angle));
}

inline std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n, double extent) {
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = Vec3(uniform(rng, -extent, extent), uniform(rng, -extent, extent), uniform(rng, -extent, extent));
  return pts;
}

/// Reference answers by exhaustive search, ordered by (distance, index).
inline std::vector<Neighbor> brute_knn(const std::vector<Vec3>& pts, const Vec3& q, std::size_t k) {
  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < pts.size(); ++i) all.push_back({i, (pts[i] - q).squaredNorm()});
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.sq_distance != b.sq_distance ? a.sq_distance < b.sq_distance : a.index < b.index;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

inline std::vector<Neighbor> brute_radius(const std::vector<Vec3>& pts, const Vec3& q, double r) {
  std::vector<Neighbor> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = (pts[i] - q).squaredNorm();
    if (d < r * r) out.push_back({i, d});
  }
  std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.sq_distance != b.sq_distance ? a.sq_distance < b.sq_distance : a.index < b.index;
  });
  return out;
}

inline double translation_error(const Pose& est, const Pose& truth) {
  return (se3_inverse(truth) * est).translation.norm();
}

inline double rotation_error_deg(const Pose& est, const Pose& truth) {
  return rotation_angle((se3_inverse(truth) * est).rotation) / kDeg;
}

}  // namespace lodom::testing
