#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lodom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

/// Semantic classes carried in Point3::label.
enum class PointClass : std::int32_t { unlabeled = -1, other = 0, car = 1, bus = 2 };

/// A single LiDAR return. `ring` and `label` are -1 when absent.
struct Point3 {
  Vec3 xyz = Vec3::Zero();
  float intensity = 0.0f;
  std::int32_t ring = -1;
  std::int32_t label = -1;

  Point3() = default;
  explicit Point3(const Vec3& p, float intensity = 0.0f, std::int32_t ring = -1, std::int32_t label = -1)
  : xyz(p), intensity(intensity), ring(ring), label(label) {}
  Point3(double x, double y, double z) : xyz(x, y, z) {}

  bool has_ring() const { return ring >= 0; }
  bool is_finite() const { return xyz.allFinite(); }
};

/// Ordered point set. Points of one ring are kept in acquisition order.
struct PointCloud {
  std::vector<Point3> points;
  std::string frame_id;
  double timestamp = 0.0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Point3& operator[](std::size_t i) const { return points[i]; }
  Point3& operator[](std::size_t i) { return points[i]; }

  /// Coordinates only, in point order.
  std::vector<Vec3> positions() const;
  static PointCloud from_positions(std::span<const Vec3> positions);
};

/// Rigid transform x -> R x + t.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Mat3& r, const Vec3& t) : rotation(r), translation(t) {}

  static Pose identity() { return Pose(); }
  static Pose from_translation(const Vec3& t) { return Pose(Mat3::Identity(), t); }
  static Pose from_translation(double x, double y, double z) { return from_translation(Vec3(x, y, z)); }
  static Pose from_axis_angle(const Vec3& axis, double angle, const Vec3& t = Vec3::Zero());
  static Pose rot_x(double angle) { return from_axis_angle(Vec3::UnitX(), angle); }
  static Pose rot_y(double angle) { return from_axis_angle(Vec3::UnitY(), angle); }
  static Pose rot_z(double angle) { return from_axis_angle(Vec3::UnitZ(), angle); }

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  Pose operator*(const Pose& other) const;

  Eigen::Matrix4d matrix() const;
  bool is_valid(double tol = 1e-9) const;
};

/// se(3) tangent vector; `v` translational part, `w` rotational part in radians.
struct Twist {
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();

  Twist() = default;
  Twist(const Vec3& v, const Vec3& w) : v(v), w(w) {}
  explicit Twist(const Vec6& xi) : v(xi.head<3>()), w(xi.tail<3>()) {}

  /// Stacked as [v; w].
  Vec6 vector() const;
  double norm() const { return vector().norm(); }
};

/// Rotation angles below this use series expansions in exp/log.
inline constexpr double kSmallAngle = 1e-9;
/// se3_log rejects rotations whose angle is within this margin of pi.
inline constexpr double kLogPiMargin = 1e-6;

Mat3 skew(const Vec3& v);

/// Applies `b` first, then `a`. The rotation is re-orthonormalized when its drift exceeds 1e-12.
Pose se3_compose(const Pose& a, const Pose& b);
Pose se3_inverse(const Pose& a);

/// Throws ErrorCode::degenerate_rotation when the rotation angle is within kLogPiMargin of pi.
Twist se3_log(const Pose& T);
Pose se3_exp(const Twist& xi);

Mat3 so3_exp(const Vec3& w);
/// Rotation angle in [0, pi].
double rotation_angle(const Mat3& R);
/// Projects a near-rotation matrix onto SO(3).
Mat3 orthonormalize(const Mat3& R);

Vec3 transform_point(const Pose& T, const Vec3& p);
/// Transforms coordinates; ring, label, intensity and header are preserved.
PointCloud transform_cloud(const Pose& T, const PointCloud& c);

/// Arithmetic mean of the coordinates. Throws ErrorCode::empty_input.
Vec3 centroid(const PointCloud& c);
Vec3 centroid(std::span<const Vec3> points);

/// Max-abs entry difference between the 4x4 matrices of two poses.
double pose_distance(const Pose& a, const Pose& b);

}  // namespace lodom
