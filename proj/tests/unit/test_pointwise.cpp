#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <lodom/error.hpp>
#include <lodom/registration.hpp>
#include <lodom/synthlidar.hpp>
#include <test_support.hpp>

using namespace lodom;
using namespace lodom::testing;

namespace {

PointCloud scene_cloud(double spacing = 0.25) { return sample_planes(three_plane_scene(), spacing); }

PointCloud noisy(const PointCloud& c, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  PointCloud out = c;
  for (auto& p : out.points) p.xyz += Vec3(n(rng), n(rng), n(rng));
  return out;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

// 0.3 m along x and 5 degrees of yaw.
const Pose kMotion = Pose::from_axis_angle(Vec3::UnitZ(), 5 * kDeg, Vec3(0.3, 0, 0));

}  // namespace

TEST_CASE("svd solve") {
  const std::vector<Vec3> src{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 2, 0), Vec3(0, 0, 3)};
  std::vector<PointPair> same, moved;
  const Pose T = Pose::from_axis_angle(Vec3::UnitZ(), 90 * kDeg, Vec3(1, 0, 0));
  for (const auto& s : src) {
    same.push_back({s, s});
    moved.push_back({s, T * s});
  }
  CHECK(pose_distance(svd_rigid_solve(same), Pose::identity()) < 1e-12);
  CHECK(pose_distance(svd_rigid_solve(moved), T) < 1e-12);
  std::vector<PointPair> line;
  for (int i = 0; i < 5; ++i) line.push_back({Vec3(i, 0, 0), Vec3(i, 1, 0)});
  CHECK(code_of([&] { svd_rigid_solve(line); }) == ErrorCode::degenerate_correspondences);
  CHECK(code_of([&] { svd_rigid_solve(std::span(moved).first(2)); }) == ErrorCode::degenerate_correspondences);
}

TEST_CASE("svd solve never returns a reflection") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const auto src = random_points(rng, 10, 3);
    std::vector<PointPair> pairs;
    for (const auto& s : src) pairs.push_back({s, Vec3(-s.x(), s.y(), s.z())});
    CHECK(svd_rigid_solve(pairs).rotation.determinant() == doctest::Approx(1.0));
  }
}

TEST_CASE("icp") {
  RegistrationParams p;
  const PointCloud target = scene_cloud();
  const RegistrationResult same = icp_align(target, target, Pose::identity(), p);
  CHECK(pose_distance(same.pose, Pose::identity()) < 1e-12);
  CHECK(same.converged);
  CHECK(same.iterations <= 2);

  p.max_iterations = 200;
  p.transform_epsilon = 1e-10;
  const PointCloud source = transform_cloud(se3_inverse(kMotion), target);
  const RegistrationResult r = icp_align(source, target, Pose::identity(), p);
  CHECK(translation_error(r.pose, kMotion) < 1e-6);
  CHECK(rotation_error_deg(r.pose, kMotion) * kDeg < 1e-6);
  for (std::size_t i = 1; i < r.cost_history.size(); ++i) CHECK(r.cost_history[i] <= r.cost_history[i - 1] + 1e-12);

  PointCloud far = transform_cloud(Pose::from_translation(100, 0, 0), target);
  p.max_correspondence_distance = 1.0;
  CHECK(code_of([&] { icp_align(far, target, Pose::identity(), p); }) == ErrorCode::no_overlap);
}

TEST_CASE("point covariances") {
  std::vector<Vec3> plane;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) plane.emplace_back(0.1 * i + 0.013 * j * j, 0.1 * j, 0.0);
  const double eps = 1e-3;
  const CovarianceSet s = point_covariances(PointCloud::from_positions(plane), 20, eps);
  REQUIRE(s.covariances.size() == plane.size());
  for (const auto& C : s.covariances) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(C);
    CHECK(es.eigenvalues()(0) == doctest::Approx(eps * es.eigenvalues()(2)).epsilon(1e-9));
    CHECK(std::abs(std::abs(es.eigenvectors().col(0).z()) - 1.0) < 1e-6);
  }

  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vec3> blob(1000);
  for (auto& v : blob) v = Vec3(n(rng), n(rng), n(rng));
  const CovarianceSet iso = point_covariances(PointCloud::from_positions(blob), 1000, eps);
  Eigen::SelfAdjointEigenSolver<Mat3> es(iso.covariances.front());
  CHECK(es.eigenvalues()(2) / es.eigenvalues()(0) < 3.0);

  CHECK(code_of([&] { point_covariances(PointCloud::from_positions(std::span(plane).first(5)), 20, eps); }) ==
        ErrorCode::insufficient_points);
}

TEST_CASE("regularize covariance") {
  bool degenerate = false;
  const Mat3 z = regularize_covariance(Mat3::Zero(), 1e-3, &degenerate);
  CHECK(degenerate);
  CHECK((z - 1e-3 * Mat3::Identity()).norm() < 1e-18);
  bool line_degenerate = false;
  const Mat3 line = Vec3(1, 0, 0).asDiagonal();
  const Mat3 r = regularize_covariance(line, 1e-3, &line_degenerate);
  CHECK(!line_degenerate);
  CHECK((r - Vec3(1, 1e-3, 1e-3).asDiagonal().toDenseMatrix()).norm() < 1e-15);
}

TEST_CASE("gicp and vgicp") {
  RegistrationParams p;
  p.max_iterations = 100;
  p.max_correspondence_distance = 3.0;
  p.voxel_resolution = 1.0;
  const PointCloud target = scene_cloud();
  const PointCloud source = noisy(transform_cloud(se3_inverse(kMotion), target), 0.02, 11);
  const PointCloud clean_target = noisy(target, 0.02, 12);

  CHECK(pose_distance(gicp_align(target, target, Pose::identity(), p).pose, Pose::identity()) < 1e-9);
  // Points are pulled toward their voxel mean, so self-alignment is only near identity.
  CHECK(pose_distance(vgicp_align(target, target, Pose::identity(), p).pose, Pose::identity()) < 0.01);

  const RegistrationResult g = gicp_align(source, clean_target, Pose::identity(), p);
  CHECK(translation_error(g.pose, kMotion) < 0.05);
  CHECK(rotation_error_deg(g.pose, kMotion) < 0.5);
  const RegistrationResult v = vgicp_align(source, clean_target, Pose::identity(), p);
  CHECK(translation_error(v.pose, kMotion) < 0.05);
  CHECK(rotation_error_deg(v.pose, kMotion) < 0.5);
  CHECK(std::isfinite(v.condition_number));
}

TEST_CASE("prepared clouds give the same answer") {
  RegistrationParams p;
  p.voxel_resolution = 1.0;
  const PointCloud target = scene_cloud(0.3);
  const PointCloud source = transform_cloud(se3_inverse(kMotion), target);
  const GaussianCloud gs = prepare_gaussian_cloud(source, p), gt = prepare_gaussian_cloud(target, p);
  CHECK(pose_distance(gicp_align(gs, gt, Pose::identity(), p).pose, gicp_align(source, target, Pose::identity(), p).pose) == 0.0);
  CHECK(pose_distance(vgicp_align(gs, gt, Pose::identity(), p).pose, vgicp_align(source, target, Pose::identity(), p).pose) == 0.0);
  CHECK(code_of([&] { prepare_gaussian_cloud(PointCloud::from_positions(std::vector<Vec3>(3, Vec3::Zero())), p); }) ==
        ErrorCode::insufficient_points);
}

TEST_CASE("vgicp on a target inside one cell is reported") {
  std::vector<Vec3> blob;
  for (int i = 0; i < 30; ++i) blob.emplace_back(0.1 + 0.02 * i, 0.5, 0.5);
  RegistrationParams p;
  p.voxel_resolution = 1.0;
  p.covariance_k = 10;
  const PointCloud c = PointCloud::from_positions(blob);
  try {
    const RegistrationResult r = vgicp_align(c, c, Pose::identity(), p);
    CHECK(r.condition_number > 1e6);
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::no_overlap || e.code() == ErrorCode::degenerate_correspondences ||
           e.code() == ErrorCode::underconstrained));
  }
}

TEST_CASE("gaussian voxels") {
  const std::vector<Vec3> pts{Vec3(0.1, 0.1, 0.1), Vec3(0.3, 0.1, 0.1), Vec3(2.5, 0, 0)};
  const std::vector<Mat3> covs{Mat3::Identity(), 3.0 * Mat3::Identity(), Mat3::Identity()};
  const GaussianVoxelMap m = build_gaussian_voxels(pts, covs, 1.0);
  CHECK(m.voxels.size() == 2);
  const GaussianVoxel* v = m.find(Vec3(0.5, 0.5, 0.5));
  REQUIRE(v);
  CHECK(v->n == 2);
  CHECK((v->mean - Vec3(0.2, 0.1, 0.1)).norm() < 1e-15);
  CHECK((v->cov - 2.0 * Mat3::Identity()).norm() < 1e-15);
}

TEST_CASE("ndt") {
  RegistrationParams p;
  const PointCloud target = scene_cloud();
  CHECK(pose_distance(ndt_align(target, target, Pose::identity(), p).pose, Pose::identity()) < 1e-4);
  p.voxel_resolution = 1.0;
  p.max_iterations = 100;
  const PointCloud source = noisy(transform_cloud(se3_inverse(kMotion), target), 0.02, 13);
  const RegistrationResult r = ndt_align(source, noisy(target, 0.02, 14), Pose::identity(), p);
  CHECK(translation_error(r.pose, kMotion) < 0.10);
  CHECK(rotation_error_deg(r.pose, kMotion) < 1.0);
  const PointCloud three = PointCloud::from_positions(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(0.1, 0, 0), Vec3(0, 0.1, 0)});
  CHECK(code_of([&] { ndt_align(three, three, Pose::identity(), p); }) == ErrorCode::insufficient_structure);
}

TEST_CASE("forward and backward alignment are inverse") {
  RegistrationParams p;
  p.max_iterations = 200;
  p.transform_epsilon = 1e-10;
  const PointCloud a = scene_cloud();
  const PointCloud b = transform_cloud(kMotion, a);
  const Pose ab = icp_align(a, b, Pose::identity(), p).pose;
  const Pose ba = icp_align(b, a, Pose::identity(), p).pose;
  CHECK(pose_distance(se3_compose(ab, ba), Pose::identity()) < 1e-4);
}

TEST_CASE("parameter validation") {
  RegistrationParams p;
  CHECK_NOTHROW(p.validate());
  p.voxel_resolution = 0.0;
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::invalid_argument);
  p = {};
  p.covariance_k = 0;
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::invalid_argument);
}

TEST_CASE("aligners are deterministic") {
  RegistrationParams p;
  p.voxel_resolution = 1.0;
  const PointCloud target = scene_cloud(0.3);
  const PointCloud source = noisy(transform_cloud(se3_inverse(kMotion), target), 0.02, 15);
  for (auto* f : {&icp_align, static_cast<RegistrationResult (*)(const PointCloud&, const PointCloud&, const Pose&,
                                                                const RegistrationParams&)>(&gicp_align),
                  &ndt_align}) {
    const auto r1 = f(source, target, Pose::identity(), p);
    const auto r2 = f(source, target, Pose::identity(), p);
    CHECK(pose_distance(r1.pose, r2.pose) == 0.0);
    CHECK(r1.cost_history == r2.cost_history);
  }
}
