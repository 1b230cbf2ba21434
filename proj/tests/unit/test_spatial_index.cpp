#include <doctest.h>

#include <lodom/error.hpp>
#include <lodom/kdtree.hpp>
#include <lodom/voxel_grid.hpp>
#include <test_support.hpp>

using namespace lodom;
using namespace lodom::testing;

TEST_CASE("knn fixtures") {
  const KdTree t(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(5, 0, 0)});
  const auto nn = t.knn(Vec3(0.9, 0, 0), 1);
  REQUIRE(nn.size() == 1);
  CHECK(nn[0].index == 1);
  CHECK(nn[0].distance() == doctest::Approx(0.1).epsilon(1e-12));
  const auto all = t.knn(Vec3(0.9, 0, 0), 10);
  REQUIRE(all.size() == 3);
  CHECK(all[0].index == 1);
  CHECK(all[1].index == 0);
  CHECK(all[2].index == 2);
  CHECK_THROWS_AS(KdTree(std::vector<Vec3>{}), Error);
}

TEST_CASE("radius fixtures") {
  std::vector<Vec3> circle;
  for (int i = 0; i < 12; ++i) circle.emplace_back(std::cos(i * std::numbers::pi / 6), std::sin(i * std::numbers::pi / 6), 0);
  const KdTree t(circle);
  CHECK(t.radius(Vec3::Zero(), 1.5).size() == 12);
  CHECK(t.radius(Vec3::Zero(), 0.5).empty());
}

TEST_CASE("ties break by index") {
  const KdTree t(std::vector<Vec3>{Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(3, 0, 0)});
  const auto nn = t.knn(Vec3::Zero(), 4);
  REQUIRE(nn.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(nn[i].index == i);
}

TEST_CASE("kd-tree matches brute force") {
  std::mt19937_64 rng(5);
  for (const std::size_t n : {1u, 7u, 200u, 3000u}) {
    auto pts = random_points(rng, n, 10);
    // Duplicates and grid-aligned points exercise the tie rule.
    for (std::size_t i = 0; i + 1 < n && i < 20; i += 2) pts[i + 1] = pts[i];
    const KdTree t(pts, 4);
    for (int q = 0; q < 100; ++q) {
      const Vec3 query = q % 5 == 0 ? pts[q % n] : Vec3(Vec3::Random() * 11.0);
      const std::size_t k = 1 + q % 9;
      CHECK(t.knn(query, k) == brute_knn(pts, query, k));
      const double r = uniform(rng, 0.1, 6.0);
      CHECK(t.radius(query, r) == brute_radius(pts, query, r));
      const auto gated = t.knn(query, k, r * r);
      std::vector<Neighbor> expect;
      for (const auto& nb : brute_knn(pts, query, k)) if (nb.sq_distance <= r * r) expect.push_back(nb);
      CHECK(gated == expect);
      const auto nearest = t.nearest(query, r * r);
      if (expect.empty()) {
        CHECK(!nearest);
      } else {
        REQUIRE(nearest);
        CHECK(*nearest == expect.front());
      }
    }
  }
}

TEST_CASE("voxel floor convention") {
  CHECK(cell_key(Vec3(0.1, 0.1, 0.1), 1.0) == CellKey{0, 0, 0});
  CHECK(cell_key(Vec3(0.9, 0.2, 0.3), 1.0) == CellKey{0, 0, 0});
  CHECK(cell_key(Vec3(-0.1, 0, 0), 1.0) == CellKey{-1, 0, 0});
  CHECK_THROWS_AS(voxel_partition(std::vector<Vec3>{Vec3::Zero()}, 0.0), Error);
}

TEST_CASE("voxel stats fixtures") {
  const VoxelGrid g = voxel_stats(voxel_partition(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(0.999, 0, 0), Vec3(5.5, 0, 0)}, 1.0));
  CHECK(g.num_cells() == 2);
  const VoxelCell* c = g.find(Vec3(0.5, 0.5, 0.5));
  REQUIRE(c);
  CHECK(c->n == 2);
  CHECK((c->mean - Vec3(0.4995, 0, 0)).norm() < 1e-15);
  CHECK(c->cov(0, 0) == doctest::Approx(0.4995 * 0.4995).epsilon(1e-12));
  const VoxelCell* single = g.find(Vec3(5.5, 0, 0));
  REQUIRE(single);
  CHECK(single->cov.norm() == 0.0);

  const VoxelGrid h = voxel_stats(voxel_partition(std::vector<Vec3>{Vec3(0, 0, 0), Vec3(1, 0, 0)}, 2.0));
  const VoxelCell* pair = h.find(Vec3::Zero());
  REQUIRE(pair);
  CHECK((pair->mean - Vec3(0.5, 0, 0)).norm() == 0.0);
  CHECK((pair->cov - Vec3(0.25, 0, 0).asDiagonal().toDenseMatrix()).norm() < 1e-15);
}

TEST_CASE("voxel stats match a two-pass computation") {
  std::mt19937_64 rng(6);
  const auto pts = random_points(rng, 5000, 4);
  const VoxelGrid g = voxel_stats(voxel_partition(pts, 0.7));
  std::size_t total = 0;
  for (const auto& key : g.sorted_keys()) {
    const VoxelCell& c = g.cells().at(key);
    total += c.indices.size();
    Vec3 mean = Vec3::Zero();
    for (const auto i : c.indices) {
      CHECK(cell_key(pts[i], 0.7) == key);
      mean += pts[i];
    }
    mean /= static_cast<double>(c.indices.size());
    Mat3 cov = Mat3::Zero();
    for (const auto i : c.indices) cov += (pts[i] - mean) * (pts[i] - mean).transpose();
    cov /= static_cast<double>(c.indices.size());
    CHECK((c.mean - mean).norm() < 1e-9);
    CHECK((c.cov - cov).norm() < 1e-9);
    CHECK(std::is_sorted(c.indices.begin(), c.indices.end()));
  }
  CHECK(total == pts.size());
  const auto keys = g.sorted_keys();
  CHECK(std::is_sorted(keys.begin(), keys.end()));
}
