#pragma once

#include <cstddef>
#include <unordered_set>
#include <vector>

#include <lodom/features.hpp>
#include <lodom/ground_segmentation.hpp>
#include <lodom/registration.hpp>
#include <lodom/voxel_grid.hpp>

namespace lodom {

/// Normal matrices with a larger condition number are reported as underconstrained.
inline constexpr double kUnderconstrainedCondition = 1e10;

/// Scan-to-scan feature odometry. Estimates the pose taking `curr` coordinates into the
/// frame of `prev`: current edges are matched to lines through two previous edges on
/// different nearby rings, current planars to planes through three previous planars.
/// `prev` supplies its mapping-sized sets as targets.
///
/// Throws ErrorCode::underconstrained when fewer than 6 correspondences are found or the
/// normal matrix is rank deficient.
RegistrationResult feature_odometry(const FeatureSet& curr, const FeatureSet& prev, const Pose& init,
                                    const FeatureParams& p);

/// The weighted objective sum w * (edge distance^2) + sum w * (plane distance^2) over the
/// correspondences chosen at `at`, evaluated at `T`.
double feature_objective(const FeatureSet& curr, const FeatureSet& prev, const Pose& at, const Pose& T,
                         const FeatureParams& p);

/// World-frame edge and planar maps, each holding at most one point per downsample cell.
class FeatureMap {
public:
  FeatureMap() = default;
  FeatureMap(double edge_cell, double planar_cell) : edge_cell_(edge_cell), planar_cell_(planar_cell) {}

  /// Adds the mapping sets of world-frame features; points landing in occupied cells are
  /// dropped. Returns the number of points added.
  std::size_t insert(const FeatureSet& world);

  const std::vector<Vec3>& edges() const { return edges_; }
  const std::vector<Vec3>& planars() const { return planars_; }
  std::size_t size() const { return edges_.size() + planars_.size(); }
  bool empty() const { return edges_.empty() && planars_.empty(); }
  double edge_cell() const { return edge_cell_; }
  double planar_cell() const { return planar_cell_; }

private:
  double edge_cell_ = 0.2;
  double planar_cell_ = 0.4;
  std::vector<Vec3> edges_;
  std::vector<Vec3> planars_;
  std::unordered_set<CellKey, CellKeyHash> edge_cells_;
  std::unordered_set<CellKey, CellKeyHash> planar_cells_;
};

struct MappingResult {
  Pose pose;  // refined world pose of the current scan
  FeatureMap map;
  RegistrationResult registration;
  /// The map was empty: the pose is init_world and the map was seeded.
  bool seeded = false;
};

/// Scan-to-map refinement. Map lines come from principal axes of nearby map edges, map planes
/// from least-squares fits of nearby map planars. The returned map includes the registered
/// frame. When the refinement is underconstrained the pose stays at init_world and
/// registration.fallback is set.
MappingResult feature_mapping(const FeatureSet& curr, FeatureMap map, const Pose& init_world, const FeatureParams& p);

/// Translation x, y, z and rotation T = Rz(yaw) Ry(pitch) Rx(roll).
struct EulerPose {
  double x = 0.0, y = 0.0, z = 0.0;
  double roll = 0.0, pitch = 0.0, yaw = 0.0;
};

EulerPose euler_from_pose(const Pose& T);
Pose pose_from_euler(const EulerPose& e);

/// Features and segmentation of one scan for the two-stage solver: planars come from the
/// ground, edges from the kept segments.
struct LegoFrame {
  FeatureSet features;
  GroundSegmentation segmentation;
};

LegoFrame extract_lego_features(const PointCloud& scan, const SensorModel& sensor, const FeatureParams& p,
                                const GroundParams& gp = {});

struct LegoResult {
  RegistrationResult registration;
  /// Stage one unknowns: [z, roll, pitch].
  EulerPose stage1;
  /// Final pose parameters after stage two.
  EulerPose stage2;
  int stage1_iterations = 0;
  int stage2_iterations = 0;
};

/// Two-stage odometry: [z, roll, pitch] from ground planars with [x, y, yaw] held at init, then
/// [x, y, yaw] from segment edges with the stage-one values held. Without ground features
/// in either frame it falls back to feature_odometry; without usable edges stage two keeps
/// the init values. Both fallbacks set registration.fallback.
LegoResult lego_two_stage(const LegoFrame& curr, const LegoFrame& prev, const Pose& init, const FeatureParams& p);

}  // namespace lodom
