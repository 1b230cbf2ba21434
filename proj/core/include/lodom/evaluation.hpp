#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <lodom/geometry.hpp>
#include <lodom/trajectory.hpp>

namespace lodom {

struct MatchedPair {
  std::size_t est = 0;
  std::size_t gt = 0;
  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

/// Greedy nearest-timestamp matching: candidate pairs within `tol` seconds are accepted in
/// order of increasing time offset, each pose used at most once. Sorted by est index.
/// Throws ErrorCode::empty_input for an empty trajectory and ErrorCode::no_overlap when
/// nothing matches.
std::vector<MatchedPair> align_timestamps(const Trajectory& est, const Trajectory& gt, double tol);

struct RpeEntry {
  std::size_t i = 0;  // indices into the matched sequence
  std::size_t j = 0;
  double translation_error = 0.0;  // meters
  double rotation_error = 0.0;     // degrees
  Pose error;
};

using RpeSeries = std::vector<RpeEntry>;

struct RpeOptions {
  /// Pair step in frames.
  int delta = 1;
  /// When set, j is the first matched pose at least this many seconds after i.
  std::optional<double> time_interval;
};

/// (gt_i^-1 gt_j)^-1 (est_i^-1 est_j) for j = i + delta over index-matched sequences.
/// Throws ErrorCode::alignment_error on a length mismatch and ErrorCode::insufficient_data
/// when fewer than delta + 1 poses are available.
RpeSeries rpe(std::span<const Pose> est, std::span<const Pose> gt, const RpeOptions& opt = {});
/// Matches the trajectories by timestamp first.
RpeSeries rpe(const Trajectory& est, const Trajectory& gt, const RpeOptions& opt = {}, double tol = 1e-3);

std::vector<double> translation_errors(const RpeSeries& s);
std::vector<double> rotation_errors(const RpeSeries& s);

/// sqrt(mean(e^2)). Throws ErrorCode::empty_input.
double rmse(std::span<const double> errors);
/// mean(|e|). Throws ErrorCode::empty_input.
double mean_abs(std::span<const double> errors);

struct MotionDifference {
  double value = 0.0;
  /// The relative rotation was too close to pi for the logarithm; value is NaN.
  bool flagged = false;
};

/// Norm of the 6-vector log of each consecutive relative pose, meters and radians mixed
/// as-is. rotation_weight scales the rotational part (1 keeps the plain norm).
/// Throws ErrorCode::insufficient_data for fewer than 2 poses.
std::vector<MotionDifference> motion_difference(std::span<const Pose> poses, double rotation_weight = 1.0);
std::vector<MotionDifference> motion_difference(const Trajectory& t, double rotation_weight = 1.0);

/// Per-point classes of one scan.
struct LabelSet {
  std::vector<PointClass> labels;

  std::size_t n_car() const;
  std::size_t n_bus() const;
  std::size_t n_total() const { return labels.size(); }

  /// Point labels of a cloud; unlabeled points count as other.
  static LabelSet from_cloud(const PointCloud& c);
};

/// (N_car + N_bus) / N_total * 100. Throws ErrorCode::empty_input when N_total is 0.
double dynamic_density(const LabelSet& labels);
/// As above, after checking the labels cover the scan (ErrorCode::alignment_error otherwise).
double dynamic_density(const PointCloud& scan, const LabelSet& labels);

/// Building elevation per azimuth bin, degrees. Bins are equally spaced and cover [0, 360).
struct SkyMask {
  std::vector<double> azimuth_deg;
  std::vector<double> elevation_deg;

  std::size_t size() const { return azimuth_deg.size(); }
  /// Throws ErrorCode::validation_error for uneven spacing, incomplete coverage or
  /// elevations outside [0, 90].
  void validate() const;
};

/// Mean elevation over the bins. Throws ErrorCode::empty_input for an empty mask.
double skymask_mea(const SkyMask& m);

/// Quartile of sorted data by linear interpolation between order statistics:
/// h = (n - 1) p, q = x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h]).
double quantile_sorted(std::span<const double> sorted, double p);

struct IqrResult {
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double threshold = 0.0;  // q3 + 1.5 iqr
  std::vector<bool> flags;  // value > threshold
  std::vector<std::size_t> outliers;
};

/// Throws ErrorCode::insufficient_data for fewer than 4 values.
IqrResult iqr_outliers(std::span<const double> values);

struct NamedTrajectory {
  std::string name;
  Trajectory trajectory;
};

/// Optional per-frame factor inputs, aligned with the ground-truth frames.
struct FactorInputs {
  std::optional<std::vector<LabelSet>> labels;
  std::optional<std::vector<SkyMask>> skymasks;
};

struct MethodReport {
  std::string name;
  RpeSeries rpe;
  /// Ground-truth frame index of each RPE entry's later pose.
  std::vector<std::size_t> frames;
  double translation_rmse = 0.0;
  double translation_mean = 0.0;
  double rotation_rmse = 0.0;
  double rotation_mean = 0.0;
  /// Whisker rule over translation errors; absent for fewer than 4 entries.
  std::optional<IqrResult> outliers;
  std::vector<std::size_t> outlier_frames;
};

struct EvalReport {
  std::vector<MethodReport> methods;
  /// Per ground-truth frame step.
  std::vector<MotionDifference> motion_difference;
  /// Per frame, percent; absent when no labels were supplied.
  std::optional<std::vector<double>> dynamic_density;
  /// Per frame, degrees; absent when no skymasks were supplied.
  std::optional<std::vector<double>> skymask_mea;
};

EvalReport build_report(const std::vector<NamedTrajectory>& estimates, const Trajectory& gt,
                        const FactorInputs& factors = {}, const RpeOptions& opt = {}, double tol = 1e-3);

}  // namespace lodom
