#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <lodom/dataio.hpp>
#include <lodom/odometry.hpp>
#include <lodom/synthlidar.hpp>

namespace lodom {

struct RunSpec {
  std::string name;
  OdometryConfig odometry;
};

/// Recorded clouds plus optional ground truth and per-frame factor inputs. Paths are resolved
/// against the config file's directory.
struct DatasetInput {
  std::vector<std::filesystem::path> clouds;
  CloudFormat format = CloudFormat::native;
  std::optional<std::filesystem::path> ground_truth;
  std::vector<std::filesystem::path> labels;
  std::vector<std::filesystem::path> skymasks;
  SensorModel sensor;
};

struct EvaluationSettings {
  int delta = 1;
  /// Timestamp matching tolerance, seconds.
  double tolerance = 1e-3;
  double rotation_weight = 1.0;
};

/// A benchmark suite: every run sees the same input.
struct RunConfig {
  std::vector<RunSpec> runs;
  std::optional<ScenarioSpec> synthetic;
  std::optional<DatasetInput> dataset;
  std::filesystem::path output_dir = "lodom_out";
  /// Seed of synthetic scenes; overrides the scenario's own seed.
  std::uint64_t seed = 0;
  EvaluationSettings evaluation;
  /// Skymasks are ray cast per synthetic frame (slow on large scenes).
  bool synthetic_skymasks = true;
};

/// Throws ErrorCode::schema_error for unknown keys, missing or duplicate run names, an empty
/// suite, bad values, or an input that is neither synthetic nor dataset.
RunConfig parse_run_config(std::string_view json, const std::filesystem::path& base_dir = {});
RunConfig read_run_config(const std::filesystem::path& path);

/// Canonical JSON of the config with every parameter explicit, used to stamp reports. Output
/// and input locations are left out so the text depends only on the experiment.
std::string run_config_to_json(const RunConfig& c);

}  // namespace lodom
