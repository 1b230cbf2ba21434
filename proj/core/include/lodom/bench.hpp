#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <lodom/evaluation.hpp>
#include <lodom/odometry.hpp>
#include <lodom/run_config.hpp>
#include <lodom/synthlidar.hpp>

namespace lodom {

/// Everything the runs of a suite share.
struct SuiteInput {
  std::vector<PointCloud> scans;
  /// Empty when the dataset has no ground truth.
  Trajectory ground_truth;
  FactorInputs factors;
};

/// Renders the synthetic scenario or reads the dataset files.
SuiteInput load_suite_input(const RunConfig& cfg);

struct MethodOutcome {
  std::string name;
  Method method = Method::icp;
  /// Absent when the run threw; error holds the message.
  std::optional<OdometryRun> run;
  std::string error;
};

struct SuiteResult {
  std::vector<MethodOutcome> outcomes;
  /// Present when ground truth is available and at least one run finished.
  std::optional<EvalReport> evaluation;
  /// Why evaluation was skipped despite ground truth (e.g. no timestamp overlap).
  std::string evaluation_error;
};

/// Runs every method in order. A failing method is recorded and the suite continues.
SuiteResult run_suite(const RunConfig& cfg, const SuiteInput& input);

/// Machine-independent report: per-method RMSE / mean accuracy, raw error series,
/// outlier frames and factor series. Contains no timings.
std::string report_json(const SuiteResult& r, const std::string& config_json = {});
/// One row per method: name, method, status, frames, diverged, RMSE / mean translation (m),
/// RMSE / mean rotation (deg).
std::string report_csv(const SuiteResult& r);
/// Per-frame translation / rotation error with outlier flags and the factor series.
std::string frame_errors_csv(const SuiteResult& r);
/// Per-method max / min / mean PTPF per stage ("N/A" for stages that never ran) with the
/// matching translation RMSE: the cost-versus-accuracy pair.
std::string efficiency_csv(const SuiteResult& r);
/// Per-frame odometry / mapping times and diagnostics of one run.
std::string ptpf_csv(const OdometryRun& run);

/// Writes <name>.traj, <name>_ptpf.csv, report.json, report.csv, frame_errors.csv and
/// efficiency.csv under `dir`, creating it if needed.
void write_suite_artifacts(const SuiteResult& r, const std::string& config_json, const std::filesystem::path& dir);

/// Writes scan_NNNNNN.lcd (native clouds), labels_NNNNNN.txt, skymask_NNNNNN.csv when present,
/// ground_truth.traj and a dataset.json usable as a run config's dataset input.
void write_synthetic_dataset(const SyntheticSequence& seq, const std::filesystem::path& dir);

}  // namespace lodom
