#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <lodom/geometry.hpp>
#include <lodom/kdtree.hpp>
#include <lodom/voxel_grid.hpp>

namespace lodom {

struct RegistrationParams {
  int max_iterations = 64;
  /// Convergence threshold on the norm of the twist update.
  double transform_epsilon = 1e-6;
  /// Nearest-neighbor association gate, meters (ICP, G-ICP).
  double max_correspondence_distance = 2.0;
  /// Cubic cell edge for VGICP and NDT, meters.
  double voxel_resolution = 3.0;
  /// Neighbors used for per-point covariances (the point itself included).
  int covariance_k = 20;
  /// Eigenvalues are clamped below at cov_regularization * largest eigenvalue.
  double cov_regularization = 1e-3;
  /// NDT cells with fewer points are ignored.
  int min_points_per_cell = 4;

  /// Throws ErrorCode::invalid_argument when a field is out of range.
  void validate() const;
};

/// One per-point 3x3 covariance per cloud point, each symmetric PSD after regularization.
struct CovarianceSet {
  std::vector<Mat3> covariances;
  /// Number of neighborhoods whose spread was zero and received an isotropic floor.
  std::size_t degenerate_neighborhoods = 0;
};

struct RegistrationResult {
  Pose pose;  // maps source coordinates into the target frame
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;  // one objective value per iteration
  double fitness = 0.0;              // mean residual norm over inlier correspondences, meters
  double condition_number = std::numeric_limits<double>::infinity();
  std::size_t num_correspondences = 0;
  /// Levenberg damping was needed at least once.
  bool damped = false;
  /// A singular combined covariance was regularized during the solve.
  bool regularization_fallback = false;
  /// The method had to fall back to a simpler formulation (see fallback_reason).
  bool fallback = false;
  std::string fallback_reason;
};

struct PointPair {
  Vec3 source;
  Vec3 target;
};

/// Closed-form least-squares rigid transform mapping sources onto targets (SVD of the
/// decentered cross-covariance, reflection corrected). Throws
/// ErrorCode::degenerate_correspondences for fewer than 3 pairs or collinear sources.
Pose svd_rigid_solve(std::span<const PointPair> pairs);

/// Point-to-point ICP. The recorded objective is 0.5 * sum of squared nearest-neighbor
/// distances with unmatched points capped at the gate, so it never increases.
RegistrationResult icp_align(const PointCloud& source, const PointCloud& target, const Pose& init,
                             const RegistrationParams& p);

/// The ICP objective at pose T against an indexed target.
double icp_objective(std::span<const Vec3> source, const KdTree& target, const Pose& T, double gate);

/// Neighborhood covariances (1/n) of each point's k nearest neighbors, eigenvalue-clamped.
/// Throws ErrorCode::insufficient_points when the cloud has fewer than k points.
CovarianceSet point_covariances(const PointCloud& c, int k, double eps);
CovarianceSet point_covariances(std::span<const Vec3> points, const KdTree& tree, int k, double eps);

/// Clamps eigenvalues below eps * largest; an all-zero matrix becomes eps * I and sets
/// *was_degenerate (which is never cleared, so one flag can collect a whole cloud).
Mat3 regularize_covariance(const Mat3& cov, double eps, bool* was_degenerate = nullptr);

RegistrationResult gicp_align(const PointCloud& source, const PointCloud& target, const Pose& init,
                              const RegistrationParams& p);

/// A cloud with its search index and per-point covariances, reusable across pairs: in
/// odometry a frame is the source once and the target once.
struct GaussianCloud {
  KdTree tree;
  CovarianceSet covariances;

  std::span<const Vec3> points() const { return tree.points(); }
  std::size_t size() const { return tree.size(); }
};

/// Throws ErrorCode::insufficient_points when the cloud has fewer than covariance_k points.
GaussianCloud prepare_gaussian_cloud(const PointCloud& cloud, const RegistrationParams& p);

RegistrationResult gicp_align(const GaussianCloud& source, const GaussianCloud& target, const Pose& init,
                              const RegistrationParams& p);

/// Per-voxel aggregate of a target: mean of member points, mean of their covariances, count.
struct GaussianVoxel {
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Zero();
  std::size_t n = 0;
};

struct GaussianVoxelMap {
  double resolution = 1.0;
  std::unordered_map<CellKey, GaussianVoxel, CellKeyHash> voxels;

  const GaussianVoxel* find(const Vec3& p) const;
};

GaussianVoxelMap build_gaussian_voxels(std::span<const Vec3> points, std::span<const Mat3> covariances,
                                       double resolution);

RegistrationResult vgicp_align(const PointCloud& source, const PointCloud& target, const Pose& init,
                               const RegistrationParams& p);
RegistrationResult vgicp_align(const GaussianCloud& source, const GaussianCloud& target, const Pose& init,
                               const RegistrationParams& p);

/// Normal distribution of one NDT cell, with the regularized inverse covariance.
struct NdtCell {
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Zero();
  Mat3 information = Mat3::Identity();
  std::size_t n = 0;
};

struct NdtMap {
  double resolution = 1.0;
  std::unordered_map<CellKey, NdtCell, CellKeyHash> cells;

  const NdtCell* find(const Vec3& p) const;
};

/// Cells with at least min_points members. Throws ErrorCode::insufficient_structure when none qualify.
NdtMap build_ndt_map(const PointCloud& target, double resolution, int min_points, double eps);

RegistrationResult ndt_align(const PointCloud& source, const PointCloud& target, const Pose& init,
                             const RegistrationParams& p);

/// Residual terms of the Gaussian aligners, exposed for verification.
///
/// All share r = T * source - target and its Jacobian with respect to a right perturbation
/// T * exp(delta), delta = [v; w].
namespace factors {

Vec3 residual(const Pose& T, const Vec3& source, const Vec3& target);
Mat36 residual_jacobian(const Pose& T, const Vec3& source);

/// (C_target + R C_source R^T)^-1. Sets *fallback when the sum had to be regularized.
Mat3 combined_information(const Pose& T, const Mat3& source_cov, const Mat3& target_cov, bool* fallback = nullptr);

/// A weighted Mahalanobis term  weight * r^T information r.
struct GaussianTerm {
  Vec3 source;
  Vec3 target;
  Mat3 information;
  double weight = 1.0;

  double cost(const Pose& T) const;
  /// sqrt(weight) * L^T r with L L^T = information; its squared norm equals cost().
  Vec3 whitened_residual(const Pose& T) const;
  Mat36 whitened_jacobian(const Pose& T) const;
};

/// One G-ICP term: target point/covariance against a source point/covariance.
GaussianTerm gicp_term(const Pose& T, const Vec3& source, const Mat3& source_cov, const Vec3& target,
                       const Mat3& target_cov);
/// One VGICP term: voxel aggregate against a source point/covariance, weighted by the voxel count.
GaussianTerm vgicp_term(const Pose& T, const Vec3& source, const Mat3& source_cov, const GaussianVoxel& voxel);
/// One NDT term: 0.5 * r^T C^-1 r against a cell distribution.
GaussianTerm ndt_term(const Vec3& source, const NdtCell& cell);

/// Exact gradient and Hessian (including second-order terms of the SE(3) retraction) of
/// 0.5 * r^T I r with respect to delta at zero.
void ndt_newton_terms(const Pose& T, const Vec3& source, const Vec3& mean, const Mat3& information, Vec6& gradient,
                      Mat6& hessian);

}  // namespace factors

}  // namespace lodom
