#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <lodom/feature_registration.hpp>
#include <lodom/features.hpp>
#include <lodom/ground_segmentation.hpp>
#include <lodom/registration.hpp>
#include <lodom/sensor.hpp>
#include <lodom/trajectory.hpp>

namespace lodom {

enum class Method { icp, gicp, vgicp, ndt, loam, lego };

/// Throws ErrorCode::invalid_argument for an unknown name.
Method method_from_name(std::string_view name);
std::string_view method_name(Method m);
bool is_feature_method(Method m);

enum class InitialGuess { identity, constant_velocity };

InitialGuess initial_guess_from_name(std::string_view name);
std::string_view initial_guess_name(InitialGuess g);

struct OdometryConfig {
  Method method = Method::gicp;
  RegistrationParams registration;
  FeatureParams features;
  GroundParams ground;
  /// Ring layout, needed by lego's range image.
  SensorModel sensor;
  InitialGuess initial_guess = InitialGuess::constant_velocity;
  /// Scan-to-map refinement after each odometry step (loam, lego).
  bool mapping_enabled = false;
  /// Point-wise methods keep the first point of each cell of this size; 0 keeps all points.
  double downsample_cell = 0.0;
  /// Frame spacing used when the scans carry no increasing timestamps, seconds.
  double frame_period = 0.1;

  /// Throws ErrorCode::invalid_argument for inconsistent settings.
  void validate() const;
};

struct FrameDiagnostics {
  bool converged = false;
  int iterations = 0;
  double condition_number = 0.0;
  bool fallback = false;
  /// Registration failed; identity motion was substituted.
  bool diverged = false;
  /// Scan-to-map refinement ran on this frame.
  bool mapped = false;
  std::string message;
};

struct FrameResult {
  std::size_t frame_index = 0;
  double timestamp = 0.0;
  /// Scan to world.
  Pose pose_world;
  /// Scan-to-scan estimate, current scan into the previous one.
  Pose odometry;
  double odometry_ms = 0.0;
  double mapping_ms = 0.0;
  FrameDiagnostics diagnostics;
};

struct OdometryRun {
  std::vector<FrameResult> frames;

  std::size_t diverged_count() const;
  Trajectory trajectory() const;
};

/// Frame 0 is the world origin. Every later scan is registered against the previous one and
/// pose_world(k) = pose_world(k - 1) * odometry(k); with mapping enabled that pose is then
/// refined against the accumulated feature map. Registration errors mark the frame diverged
/// and substitute identity motion. Throws ErrorCode::empty_input without scans.
OdometryRun run_odometry(std::span<const PointCloud> scans, const OdometryConfig& cfg);

struct StageTiming {
  double max_ms = 0.0;
  double min_ms = 0.0;
  double mean_ms = 0.0;
  /// False when the stage never ran (reported as N/A).
  bool available = false;
};

struct PtpfSummary {
  StageTiming odometry;
  StageTiming mapping;
};

/// Exact max / min / mean over the recorded per-frame times. Throws ErrorCode::empty_input.
PtpfSummary ptpf_summary(std::span<const FrameResult> frames);
StageTiming stage_timing(std::span<const double> times_ms);

/// Trajectory text of the run, as read back by read_trajectory.
std::string export_trajectory(const OdometryRun& run);
void export_trajectory(const OdometryRun& run, const std::filesystem::path& path);

/// First point of each cubic cell, in input order.
PointCloud downsample_first(const PointCloud& c, double cell);

}  // namespace lodom
