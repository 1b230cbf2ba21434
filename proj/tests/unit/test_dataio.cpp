#include <doctest.h>

#include <cstring>
#include <filesystem>

#include <lodom/dataio.hpp>
#include <lodom/error.hpp>
#include <test_support.hpp>

using namespace lodom;
using namespace lodom::testing;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "lodom_test_dataio";
  std::filesystem::create_directories(dir);
  return dir / name;
}

PointCloud sample_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PointCloud c;
  c.frame_id = "velodyne";
  c.timestamp = 12.25;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(Vec3(uniform(rng, -50, 50), uniform(rng, -50, 50), uniform(rng, -5, 5)),
                          static_cast<float>(uniform(rng, 0, 1)), static_cast<std::int32_t>(i % 32),
                          static_cast<std::int32_t>(i % 3));
  }
  return c;
}

void check_same(const PointCloud& a, const PointCloud& b) {
  REQUIRE(a.size() == b.size());
  CHECK(a.frame_id == b.frame_id);
  CHECK(a.timestamp == b.timestamp);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].xyz == b[i].xyz);
    CHECK(a[i].intensity == b[i].intensity);
    CHECK(a[i].ring == b[i].ring);
    CHECK(a[i].label == b[i].label);
  }
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

}  // namespace

TEST_CASE("native clouds round trip bit-exactly") {
  const PointCloud c = sample_cloud(500, 1);
  const auto bytes = serialize_cloud(c, CloudFormat::native);
  check_same(parse_cloud(bytes, CloudFormat::native), c);
  CHECK(serialize_cloud(c, CloudFormat::native) == bytes);
  const CloudHeader h = parse_cloud_header(bytes);
  CHECK(h.point_count == 500);
  CHECK(h.frame_id == "velodyne");
  CHECK(h.fields == (cloud_fields::intensity | cloud_fields::ring | cloud_fields::label));

  const auto path = scratch("a.lcd");
  write_cloud(c, path, CloudFormat::native);
  write_cloud(c, scratch("b.lcd"), CloudFormat::native);
  CHECK(read_binary_file(path) == read_binary_file(scratch("b.lcd")));
  check_same(read_cloud(path, CloudFormat::native), c);
}

TEST_CASE("empty cloud") {
  const auto bytes = serialize_cloud(PointCloud{}, CloudFormat::native);
  CHECK(parse_cloud_header(bytes).point_count == 0);
  CHECK(parse_cloud(bytes, CloudFormat::native).empty());
}

TEST_CASE("truncated native payload names the offset") {
  const auto bytes = serialize_cloud(sample_cloud(10, 2), CloudFormat::native);
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 7);
  try {
    parse_cloud(cut, CloudFormat::native);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse_error);
    CHECK(std::string(e.what()).find("byte ") != std::string::npos);
  }
  std::vector<std::uint8_t> bad = bytes;
  bad[0] = 'X';
  CHECK(code_of([&] { parse_cloud(bad, CloudFormat::native); }) == ErrorCode::parse_error);
}

TEST_CASE("ascii clouds") {
  const std::string text = "0 0 0\n1 2 3\n";
  const PointCloud c = parse_cloud(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), CloudFormat::ascii_xyz);
  REQUIRE(c.size() == 2);
  CHECK(c[1].xyz == Vec3(1, 2, 3));
  CHECK(c[1].ring == -1);
  const PointCloud s = sample_cloud(50, 3);
  const auto bytes = serialize_cloud(s, CloudFormat::ascii_xyz);
  const PointCloud back = parse_cloud(bytes, CloudFormat::ascii_xyz);
  REQUIRE(back.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(back[i].xyz == s[i].xyz);
    CHECK(back[i].ring == s[i].ring);
    CHECK(back[i].label == s[i].label);
  }
}

TEST_CASE("non-finite points are dropped and counted") {
  const std::string text = "0 0 0\nnan 1 1\n1 inf 2\n4 5 6\n";
  CloudReadStats stats;
  const PointCloud c = parse_cloud(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), CloudFormat::ascii_xyz, &stats);
  CHECK(c.size() == 2);
  CHECK(stats.dropped_non_finite == 2);
}

TEST_CASE("kitti clouds are read-only") {
  std::vector<std::uint8_t> bytes;
  for (const float v : {1.0f, 2.0f, 3.0f, 0.5f, -1.0f, 0.0f, 2.5f, 0.25f}) {
    std::uint8_t b[4];
    std::memcpy(b, &v, 4);
    bytes.insert(bytes.end(), b, b + 4);
  }
  const PointCloud c = parse_cloud(bytes, CloudFormat::kitti_bin);
  REQUIRE(c.size() == 2);
  CHECK(c[0].xyz == Vec3(1, 2, 3));
  CHECK(c[1].intensity == 0.25f);
  bytes.pop_back();
  CHECK(code_of([&] { parse_cloud(bytes, CloudFormat::kitti_bin); }) == ErrorCode::parse_error);
  CHECK(code_of([&] { serialize_cloud(c, CloudFormat::kitti_bin); }) == ErrorCode::invalid_argument);
  CHECK(cloud_format_from_name("kitti-bin") == CloudFormat::kitti_bin);
  CHECK(cloud_format_name(CloudFormat::ascii_xyz) == "ascii-xyz");
  CHECK(code_of([] { cloud_format_from_name("pcd"); }) == ErrorCode::invalid_argument);
}

TEST_CASE("trajectories") {
  const Trajectory id = parse_trajectory("0.0 0 0 0 0 0 0 1\n");
  REQUIRE(id.size() == 1);
  CHECK(id[0].timestamp == 0.0);
  CHECK(pose_distance(id[0].pose, Pose::identity()) == 0.0);

  std::mt19937_64 rng(4);
  Trajectory t;
  for (int i = 0; i < 100; ++i) t.push_back({0.1 * i + 1e9, random_pose(rng, 500, 3.1)});
  const Trajectory back = parse_trajectory(format_trajectory(t));
  REQUIRE(back.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back[i].timestamp == t[i].timestamp);
    CHECK(pose_distance(back[i].pose, t[i].pose) < 1e-9);
  }
  const auto path = scratch("t.traj");
  write_trajectory(t, path);
  CHECK(read_trajectory(path).size() == 100);
}

TEST_CASE("non-unit quaternions are normalized with a warning") {
  TrajectoryReadStats stats;
  const Trajectory t = parse_trajectory("# comment\n\n1 0 0 0 0 0 0 1.1\n2 0 0 0 0 0 0 1\n", &stats);
  REQUIRE(t.size() == 2);
  CHECK(pose_distance(t[0].pose, Pose::identity()) < 1e-15);
  REQUIRE(stats.normalized_lines.size() == 1);
  CHECK(stats.normalized_lines[0] == 3);
}

TEST_CASE("malformed trajectory lines name the line") {
  try {
    parse_trajectory("0 0 0 0 0 0 0 1\n1 0 0 x 0 0 0 1\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse_error);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(code_of([] { parse_trajectory("0 0 0 0 0 0 0\n"); }) == ErrorCode::parse_error);
  CHECK(code_of([] { parse_trajectory("0 0 0 0 0 0 0 0\n"); }) == ErrorCode::parse_error);
}

TEST_CASE("labels") {
  const LabelSet l = parse_labels("car\ncar\nother\nbus\ncar\nother\nother\nother\n");
  CHECK(l.n_car() == 3);
  CHECK(l.n_bus() == 1);
  CHECK(l.n_total() == 8);
  CHECK(parse_labels(format_labels(l)).labels == l.labels);
  CHECK(code_of([] { parse_labels("truck\n"); }) == ErrorCode::parse_error);
  const auto path = scratch("l.txt");
  write_labels(l, path);
  PointCloud eight = PointCloud::from_positions(std::vector<Vec3>(8, Vec3::Zero()));
  CHECK(read_labels(path, eight).n_car() == 3);
  eight.points.pop_back();
  CHECK(code_of([&] { read_labels(path, eight); }) == ErrorCode::alignment_error);
  CHECK(dynamic_density(parse_labels("other\nother\n")) == 0.0);
}

TEST_CASE("skymasks") {
  std::string csv = "azimuth_deg,elevation_deg\n";
  for (int i = 0; i < 360; ++i) csv += std::to_string(i) + ",10\n";
  CHECK(parse_skymask(csv).size() == 360);
  const SkyMask toy = parse_skymask("0,0\n90,30\n180,60\n270,90\n");
  CHECK(skymask_mea(toy) == 45.0);
  CHECK(parse_skymask(format_skymask(toy)).elevation_deg == toy.elevation_deg);
  CHECK(code_of([] { parse_skymask("0,0\n90,95\n180,0\n270,0\n"); }) == ErrorCode::validation_error);
  CHECK(code_of([] { parse_skymask("0,0\n90,0\n200,0\n270,0\n"); }) == ErrorCode::validation_error);
  const auto path = scratch("m.csv");
  write_skymask(toy, path);
  CHECK(read_skymask(path).azimuth_deg == toy.azimuth_deg);
}

TEST_CASE("shortest decimal form") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-0.0) == "0");
  CHECK(format_double(1e-20) == "1e-20");
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double v = uniform(rng, -1e6, 1e6) * std::pow(10.0, uniform(rng, -10, 10));
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("parsers survive arbitrary bytes") {
  std::mt19937_64 rng(6);
  const auto seed = serialize_cloud(sample_cloud(20, 7), CloudFormat::native);
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::uint8_t> bytes = seed;
    if (i % 2) {
      bytes.resize(rng() % (seed.size() + 10));
      for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
    } else {
      for (int k = 0; k < 1 + i % 8; ++k) bytes[rng() % bytes.size()] = static_cast<std::uint8_t>(rng());
    }
    const std::string text(bytes.begin(), bytes.end());
    for (const CloudFormat f : {CloudFormat::native, CloudFormat::ascii_xyz, CloudFormat::kitti_bin}) {
      try {
        (void)parse_cloud(bytes, f);
      } catch (const Error&) {
      }
    }
    try { (void)parse_trajectory(text); } catch (const Error&) {}
    try { (void)parse_labels(text); } catch (const Error&) {}
    try { (void)parse_skymask(text); } catch (const Error&) {}
  }
  CHECK(true);
}

TEST_CASE("missing files are io errors") {
  CHECK(code_of([] { read_text_file("/nonexistent/lodom/x.traj"); }) == ErrorCode::io_error);
  CHECK(code_of([] { write_file("/nonexistent/lodom/x.traj", std::string_view("x")); }) == ErrorCode::io_error);
}
