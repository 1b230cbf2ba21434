#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <lodom/geometry.hpp>

namespace lodom {

struct FeatureParams {
  /// Equal-length slices each ring is split into before selection.
  int subregions_per_ring = 6;
  /// Curvature separating edge candidates (above) from planar candidates (below). Sits above
  /// what 1-2 cm range noise produces on flat surfaces.
  double edge_threshold = 0.01;
  int edges_per_subregion = 2;
  int planars_per_subregion = 4;
  /// Neighbors on each side used by the curvature; the window holds 2 * half_width + 1 points.
  int neighborhood_half_width = 5;
  /// Mapping keeps this many times the odometry edge budget, and every planar candidate.
  int mapping_edge_multiplier = 10;
  bool outlier_rejection = true;
  /// Range jump between ring neighbors treated as an occlusion boundary, meters.
  double occlusion_gap = 0.3;
  /// A point is beam-parallel when both neighbor gaps exceed this fraction of range^2.
  double parallel_beam_ratio = 0.0002;

  /// Bisquare scale r0 of the residual weights, meters.
  double weight_scale = 0.5;
  /// Iterations solved with unit weights before the bisquare weights switch on.
  int unweighted_iterations = 5;
  /// Association gate for scan-to-scan matching, meters.
  double correspondence_distance = 5.0;
  /// Ring window searched for the second line / plane point.
  int ring_search_window = 2;
  int max_iterations = 30;
  double transform_epsilon = 1e-6;

  /// Map downsample cells, meters.
  double edge_map_cell = 0.2;
  double planar_map_cell = 0.4;
  /// Mapping neighborhoods: size, and the maximum distance of the farthest member.
  int map_neighbors = 5;
  double map_neighbor_distance = 1.0;
  /// A map edge neighborhood is a line when its largest eigenvalue is this many times the next.
  double line_eigen_ratio = 3.0;
  /// A map planar neighborhood is rejected when a member lies farther than this off the fit.
  double plane_fit_tolerance = 0.2;

  /// Throws ErrorCode::invalid_argument when a field is out of range.
  void validate() const;
};

struct FeaturePoint {
  Vec3 xyz = Vec3::Zero();
  double curvature = 0.0;
  int ring = -1;
  int subregion = -1;
  std::size_t source_index = 0;  // index in the originating scan
};

/// Odometry features (budgeted per subregion) and the larger mapping sets. The mapping sets
/// contain the odometry sets.
struct FeatureSet {
  std::vector<FeaturePoint> edges;
  std::vector<FeaturePoint> planars;
  std::vector<FeaturePoint> map_edges;
  std::vector<FeaturePoint> map_planars;

  bool empty() const { return edges.empty() && planars.empty(); }
};

FeatureSet transform_features(const Pose& T, const FeatureSet& f);

/// Point indices of each ring in acquisition order, indexed by ring id.
/// Throws ErrorCode::unorganized_scan when a point has no ring.
std::vector<std::vector<std::size_t>> ring_sequences(const PointCloud& scan);

/// Per-point smoothness c_i = |sum_j (x_i - x_j)| / (N_s |x_i|), N_s = 2 * half_width + 1,
/// over the half_width predecessors and successors in the same ring. Points without a full
/// neighborhood (ring ends) are nullopt.
std::vector<std::optional<double>> compute_curvature(const PointCloud& scan, const FeatureParams& p);

/// Points excluded from selection: neighbors across an occlusion boundary, and returns from
/// surfaces nearly parallel to the beam.
std::vector<bool> reject_unreliable(const PointCloud& scan, const FeatureParams& p);

/// Edge and planar selection per ring and subregion.
FeatureSet extract_features(const PointCloud& scan, const FeatureParams& p);

/// As extract_features, restricted to candidates accepted by the masks (LeGO-style:
/// edges from segmented clusters, planars from the ground).
FeatureSet extract_features(const PointCloud& scan, const FeatureParams& p, const std::vector<bool>& edge_allowed,
                            const std::vector<bool>& planar_allowed);

/// Distance from q to the line through a and b. Throws ErrorCode::degenerate_line when a == b.
double edge_residual(const Vec3& q, const Vec3& a, const Vec3& b);
/// Distance from q to the plane through a, b, c. Throws ErrorCode::degenerate_plane when collinear.
double plane_residual(const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c);

/// Gradients of edge_residual(T * p, a, b) and plane_residual(T * p, a, b, c) with respect
/// to a right perturbation T * exp(delta), delta = [v; w]. Zero where the distance is zero.
Vec6 edge_residual_jacobian(const Pose& T, const Vec3& p, const Vec3& a, const Vec3& b);
Vec6 plane_residual_jacobian(const Pose& T, const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Bisquare weight (1 - (r / r0)^2)^2 for |r| < r0, else 0.
double bisquare_weight(double r, double r0);

}  // namespace lodom
