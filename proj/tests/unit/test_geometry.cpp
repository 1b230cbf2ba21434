#include <doctest.h>

#include <lodom/error.hpp>
#include <lodom/geometry.hpp>
#include <test_support.hpp>

using namespace lodom;
using namespace lodom::testing;

TEST_CASE("compose and inverse fixtures") {
  const Pose T = Pose::from_axis_angle(Vec3(1, 2, 3).normalized(), 0.7, Vec3(0.5, -1, 2));
  CHECK(pose_distance(se3_compose(Pose::identity(), T), T) < 1e-15);
  CHECK(pose_distance(se3_compose(T, se3_inverse(T)), Pose::identity()) < 1e-12);
  CHECK(pose_distance(se3_compose(Pose::from_translation(1, 0, 0), Pose::from_translation(0, 2, 0)),
                      Pose::from_translation(1, 2, 0)) == 0.0);
  CHECK(pose_distance(se3_inverse(Pose::identity()), Pose::identity()) == 0.0);
  CHECK(pose_distance(se3_inverse(Pose::from_translation(1, 2, 3)), Pose::from_translation(-1, -2, -3)) == 0.0);
  CHECK(pose_distance(se3_inverse(Pose::rot_z(kDeg * 90)), Pose::rot_z(-kDeg * 90)) < 1e-15);
}

TEST_CASE("compose applies the right operand first") {
  const Pose a = Pose::rot_z(kDeg * 90);
  const Pose b = Pose::from_translation(1, 0, 0);
  const Vec3 p = se3_compose(a, b) * Vec3::Zero();
  CHECK((p - Vec3(0, 1, 0)).norm() < 1e-15);
}

TEST_CASE("log and exp fixtures") {
  CHECK(se3_log(Pose::identity()).norm() == 0.0);
  const Twist t = se3_log(Pose::from_translation(3, 4, 0));
  CHECK((t.v - Vec3(3, 4, 0)).norm() < 1e-15);
  CHECK(t.w.norm() == 0.0);
  const Twist r = se3_log(Pose::rot_z(0.4));
  CHECK((r.w - Vec3(0, 0, 0.4)).norm() < 1e-15);
  CHECK(r.v.norm() < 1e-15);
  CHECK(pose_distance(se3_exp(Twist()), Pose::identity()) == 0.0);
  CHECK(pose_distance(se3_exp(Twist(Vec3(1, 0, 0), Vec3::Zero())), Pose::from_translation(1, 0, 0)) == 0.0);
}

TEST_CASE("log rejects rotations near pi") {
  const Pose T = Pose::from_axis_angle(Vec3::UnitX(), std::numbers::pi - 1e-8);
  try {
    (void)se3_log(T);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_rotation);
  }
}

TEST_CASE("exp/log round trip on random twists") {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Twist xi = random_twist(rng, 5.0, 3.0);
    worst = std::max(worst, (se3_log(se3_exp(xi)).vector() - xi.vector()).norm());
    const Pose T = random_pose(rng, 5.0, 3.0);
    worst = std::max(worst, pose_distance(se3_exp(se3_log(T)), T));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("small-angle series agrees with the closed form") {
  const Vec3 axis = Vec3(0.3, -0.2, 0.9).normalized();
  for (const double a : {1e-10, 1e-9, 1e-8, 1e-6}) {
    const Twist xi(Vec3(0.1, 0.2, 0.3), axis * a);
    CHECK(pose_distance(se3_exp(se3_log(se3_exp(xi))), se3_exp(xi)) < 1e-14);
    CHECK((se3_log(se3_exp(xi)).vector() - xi.vector()).norm() < 1e-12);
  }
}

TEST_CASE("group laws") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng, 10, 3), b = random_pose(rng, 10, 3), c = random_pose(rng, 10, 3);
    CHECK(pose_distance(se3_compose(se3_compose(a, b), c), se3_compose(a, se3_compose(b, c))) < 1e-9);
    CHECK(pose_distance(se3_compose(se3_inverse(a), a), Pose::identity()) < 1e-9);
    CHECK(a.is_valid());
  }
}

TEST_CASE("transform_cloud is an isometry and keeps attributes") {
  std::mt19937_64 rng(3);
  PointCloud c;
  for (int i = 0; i < 40; ++i) c.points.emplace_back(Vec3::Random() * 5.0, 0.5f, i % 4, i % 3);
  c.frame_id = "lidar";
  c.timestamp = 1.5;
  const Pose T = random_pose(rng, 10, 3);
  const PointCloud d = transform_cloud(T, c);
  REQUIRE(d.size() == c.size());
  CHECK(d.frame_id == "lidar");
  CHECK(d.timestamp == 1.5);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(d[i].ring == c[i].ring);
    CHECK(d[i].label == c[i].label);
    for (std::size_t j = 0; j < c.size(); ++j) {
      CHECK(std::abs((d[i].xyz - d[j].xyz).norm() - (c[i].xyz - c[j].xyz).norm()) < 1e-9);
    }
  }
  const PointCloud one = transform_cloud(Pose::from_translation(1, 0, 0), PointCloud::from_positions(std::vector{Vec3::Zero().eval()}));
  CHECK((one[0].xyz - Vec3(1, 0, 0)).norm() == 0.0);
  CHECK(pose_distance(Pose::identity(), Pose::identity()) == 0.0);
}

TEST_CASE("centroid") {
  CHECK((centroid(PointCloud::from_positions(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(2, 0, 0)})) - Vec3(1, 0, 0)).norm() == 0.0);
  CHECK((centroid(PointCloud::from_positions(std::vector<Vec3>{Vec3(1, 1, 1)})) - Vec3(1, 1, 1)).norm() == 0.0);
  CHECK((centroid(PointCloud::from_positions(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(1, 2, 3), Vec3(2, 4, 6)})) -
         Vec3(1, 2, 3)).norm() < 1e-15);
  CHECK_THROWS_AS((void)centroid(PointCloud{}), Error);

  std::mt19937_64 rng(4);
  const auto pts = random_points(rng, 100, 10);
  const PointCloud c = PointCloud::from_positions(pts);
  const Pose T = random_pose(rng, 5, 2);
  CHECK((centroid(transform_cloud(T, c)) - transform_point(T, centroid(c))).norm() < 1e-12);
}

TEST_CASE("orthonormalize and rotation_angle") {
  Mat3 R = so3_exp(Vec3(0.1, 0.2, 0.3));
  CHECK(std::abs(rotation_angle(R) - Vec3(0.1, 0.2, 0.3).norm()) < 1e-12);
  R(0, 1) += 1e-6;
  const Mat3 Q = orthonormalize(R);
  CHECK((Q.transpose() * Q - Mat3::Identity()).norm() < 1e-12);
  CHECK(Q.determinant() > 0.0);
  CHECK(std::abs(rotation_angle(Pose::rot_x(std::numbers::pi).rotation) - std::numbers::pi) < 1e-12);
}

TEST_CASE("skew matches the cross product") {
  const Vec3 a(1, -2, 3), b(0.5, 0.25, -4);
  CHECK((skew(a) * b - a.cross(b)).norm() < 1e-15);
}
