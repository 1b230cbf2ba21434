#include <lodom/geometry.hpp>

#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include <lodom/error.hpp>

namespace lodom {

std::vector<Vec3> PointCloud::positions() const {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    out.push_back(p.xyz);
  }
  return out;
}

PointCloud PointCloud::from_positions(std::span<const Vec3> positions) {
  PointCloud c;
  c.points.reserve(positions.size());
  for (const auto& p : positions) {
    c.points.emplace_back(p);
  }
  return c;
}

Pose Pose::from_axis_angle(const Vec3& axis, double angle, const Vec3& t) {
  return Pose(Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), t);
}

Pose Pose::operator*(const Pose& other) const {
  return se3_compose(*this, other);
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

bool Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) {
    return false;
  }
  const double drift = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return drift <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Vec6 Twist::vector() const {
  Vec6 xi;
  xi << v, w;
  return xi;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),  //
    v.z(), 0.0, -v.x(),     //
    -v.y(), v.x(), 0.0;
  return m;
}

Mat3 orthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) {
    U.col(2) *= -1.0;
  }
  return U * V.transpose();
}

Pose se3_compose(const Pose& a, const Pose& b) {
  Mat3 R = a.rotation * b.rotation;
  const double drift = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (drift > 1e-12) {
    R = orthonormalize(R);
  }
  return Pose(R, a.rotation * b.translation + a.translation);
}

Pose se3_inverse(const Pose& a) {
  const Mat3 Rt = a.rotation.transpose();
  return Pose(Rt, -(Rt * a.translation));
}

namespace {

// sin(t)/t, (1-cos t)/t^2 and (t - sin t)/t^3 with series fallbacks.
struct ExpCoefficients {
  double a;
  double b;
  double c;
};

ExpCoefficients exp_coefficients(double theta) {
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    return {1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0};
  }
  const double s = std::sin(theta);
  const double half = std::sin(0.5 * theta);
  const double t2 = theta * theta;
  return {s / theta, 2.0 * half * half / t2, (theta - s) / (t2 * theta)};
}

}  // namespace

Mat3 so3_exp(const Vec3& w) {
  const double theta = w.norm();
  const auto k = exp_coefficients(theta);
  const Mat3 W = skew(w);
  return Mat3::Identity() + k.a * W + k.b * W * W;
}

double rotation_angle(const Mat3& R) {
  const Vec3 axis(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double s = 0.5 * axis.norm();
  const double c = 0.5 * (R.trace() - 1.0);
  return std::atan2(s, c);
}

Pose se3_exp(const Twist& xi) {
  const double theta = xi.w.norm();
  const auto k = exp_coefficients(theta);
  const Mat3 W = skew(xi.w);
  const Mat3 W2 = W * W;
  const Mat3 R = Mat3::Identity() + k.a * W + k.b * W2;
  const Mat3 V = Mat3::Identity() + k.b * W + k.c * W2;
  return Pose(R, V * xi.v);
}

Twist se3_log(const Pose& T) {
  const Mat3& R = T.rotation;
  const double theta = rotation_angle(R);
  if (std::numbers::pi - theta < kLogPiMargin) {
    throw Error(ErrorCode::degenerate_rotation, "se3_log: rotation angle too close to pi");
  }

  const Vec3 vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  Vec3 w;
  double d;  // coefficient of W^2 in V^-1
  if (theta < kSmallAngle) {
    w = 0.5 * vee;
    d = 1.0 / 12.0;
  } else {
    const double s = std::sin(theta);
    w = (theta / (2.0 * s)) * vee;
    const double half = std::sin(0.5 * theta);
    const double one_minus_cos = 2.0 * half * half;
    d = (1.0 - theta * s / (2.0 * one_minus_cos)) / (theta * theta);
  }
  const Mat3 W = skew(w);
  const Mat3 V_inv = Mat3::Identity() - 0.5 * W + d * W * W;
  return Twist(V_inv * T.translation, w);
}

Vec3 transform_point(const Pose& T, const Vec3& p) {
  return T.rotation * p + T.translation;
}

PointCloud transform_cloud(const Pose& T, const PointCloud& c) {
  PointCloud out = c;
  for (auto& p : out.points) {
    p.xyz = T.rotation * p.xyz + T.translation;
  }
  return out;
}

Vec3 centroid(std::span<const Vec3> points) {
  if (points.empty()) {
    throw Error(ErrorCode::empty_input, "centroid of an empty point set");
  }
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points) {
    sum += p;
  }
  return sum / static_cast<double>(points.size());
}

Vec3 centroid(const PointCloud& c) {
  if (c.empty()) {
    throw Error(ErrorCode::empty_input, "centroid of an empty cloud");
  }
  Vec3 sum = Vec3::Zero();
  for (const auto& p : c.points) {
    sum += p.xyz;
  }
  return sum / static_cast<double>(c.size());
}

double pose_distance(const Pose& a, const Pose& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

}  // namespace lodom
