#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <lodom/evaluation.hpp>
#include <lodom/geometry.hpp>
#include <lodom/trajectory.hpp>

namespace lodom {

/// native: little-endian binary with header (see below). ascii_xyz: "x y z [intensity ring label]"
/// per line. kitti_bin: x, y, z, intensity as float32 per point, read-only.
enum class CloudFormat { native, ascii_xyz, kitti_bin };

/// Parses "native", "ascii-xyz" or "kitti-bin". Throws ErrorCode::invalid_argument.
CloudFormat cloud_format_from_name(std::string_view name);
std::string_view cloud_format_name(CloudFormat f);

/// Native layout, all little-endian:
///   char[8] "LODMCLD\0", u32 version, u32 fields, u64 count, f64 timestamp,
///   u32 frame_id length, frame_id bytes, then per point f64 x, y, z followed by
///   f32 intensity, i32 ring, i32 label for each field bit set (1, 2, 4).
inline constexpr std::uint32_t kCloudVersion = 1;

namespace cloud_fields {
inline constexpr std::uint32_t intensity = 1;
inline constexpr std::uint32_t ring = 2;
inline constexpr std::uint32_t label = 4;
}  // namespace cloud_fields

struct CloudHeader {
  std::uint32_t version = kCloudVersion;
  std::uint32_t fields = 0;
  std::uint64_t point_count = 0;
  double timestamp = 0.0;
  std::string frame_id;
};

struct CloudReadStats {
  std::size_t dropped_non_finite = 0;
};

/// Throws ErrorCode::parse_error naming the byte offset of the first bad byte.
PointCloud parse_cloud(std::span<const std::uint8_t> bytes, CloudFormat format, CloudReadStats* stats = nullptr);
/// Same output for the same cloud. kitti_bin is not writable (ErrorCode::invalid_argument).
std::vector<std::uint8_t> serialize_cloud(const PointCloud& cloud, CloudFormat format);

/// Header of a native file only.
CloudHeader parse_cloud_header(std::span<const std::uint8_t> bytes);

PointCloud read_cloud(const std::filesystem::path& path, CloudFormat format, CloudReadStats* stats = nullptr);
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

struct TrajectoryReadStats {
  /// Lines whose quaternion was rescaled to unit length.
  std::vector<std::size_t> normalized_lines;
};

/// Lines "t tx ty tz qx qy qz qw", '#' starts a comment. Throws ErrorCode::parse_error naming
/// the line number.
Trajectory parse_trajectory(std::string_view text, TrajectoryReadStats* stats = nullptr);
/// Header comment then one pose per line, shortest round-trip decimal form, qw >= 0.
std::string format_trajectory(const Trajectory& t);

Trajectory read_trajectory(const std::filesystem::path& path, TrajectoryReadStats* stats = nullptr);
void write_trajectory(const Trajectory& t, const std::filesystem::path& path);

/// One token per line: car, bus or other.
LabelSet parse_labels(std::string_view text);
std::string format_labels(const LabelSet& labels);
LabelSet read_labels(const std::filesystem::path& path);
/// Throws ErrorCode::alignment_error unless there is one label per cloud point.
LabelSet read_labels(const std::filesystem::path& path, const PointCloud& cloud);
void write_labels(const LabelSet& labels, const std::filesystem::path& path);

/// CSV rows "azimuth_deg,elevation_deg" with an optional header row. The result is validated.
SkyMask parse_skymask(std::string_view text);
std::string format_skymask(const SkyMask& m);
SkyMask read_skymask(const std::filesystem::path& path);
void write_skymask(const SkyMask& m, const std::filesystem::path& path);

/// Shortest decimal that parses back to the same double; -0 prints as 0.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
/// Writes through a temporary file in the same directory. Throws ErrorCode::io_error.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file(const std::filesystem::path& path, std::string_view text);

}  // namespace lodom
