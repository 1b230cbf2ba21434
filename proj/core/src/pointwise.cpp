#include <lodom/registration.hpp>

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <lodom/error.hpp>
#include <lodom/optimizer.hpp>

namespace lodom {

void RegistrationParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) {
      throw Error(ErrorCode::invalid_argument, std::string("registration params: ") + what);
    }
  };
  require(max_iterations > 0, "max_iterations must be positive");
  require(transform_epsilon > 0.0, "transform_epsilon must be positive");
  require(max_correspondence_distance > 0.0, "max_correspondence_distance must be positive");
  require(voxel_resolution > 0.0, "voxel_resolution must be positive");
  require(covariance_k > 0, "covariance_k must be positive");
  require(cov_regularization > 0.0, "cov_regularization must be positive");
  require(min_points_per_cell >= 4, "min_points_per_cell must be at least 4");
}

// ---------------------------------------------------------------------------
// factors

namespace factors {

Vec3 residual(const Pose& T, const Vec3& source, const Vec3& target) {
  return T.rotation * source + T.translation - target;
}

Mat36 residual_jacobian(const Pose& T, const Vec3& source) {
  Mat36 J;
  J.leftCols<3>() = T.rotation;
  J.rightCols<3>() = -T.rotation * skew(source);
  return J;
}

Mat3 combined_information(const Pose& T, const Mat3& source_cov, const Mat3& target_cov, bool* fallback) {
  Mat3 C = target_cov + T.rotation * source_cov * T.rotation.transpose();
  C = 0.5 * (C + C.transpose());
  Eigen::LLT<Mat3> llt(C);
  if (llt.info() != Eigen::Success) {
    if (fallback) {
      *fallback = true;
    }
    C.diagonal().array() += std::max(1e-6 * C.trace(), 1e-9);
    llt.compute(C);
  }
  return llt.solve(Mat3::Identity());
}

double GaussianTerm::cost(const Pose& T) const {
  const Vec3 r = residual(T, source, target);
  return weight * r.dot(information * r);
}

Vec3 GaussianTerm::whitened_residual(const Pose& T) const {
  const Eigen::LLT<Mat3> llt(information);
  const Mat3 U = llt.matrixU();
  return std::sqrt(weight) * (U * residual(T, source, target));
}

Mat36 GaussianTerm::whitened_jacobian(const Pose& T) const {
  const Eigen::LLT<Mat3> llt(information);
  const Mat3 U = llt.matrixU();
  return std::sqrt(weight) * (U * residual_jacobian(T, source));
}

GaussianTerm gicp_term(const Pose& T, const Vec3& source, const Mat3& source_cov, const Vec3& target,
                       const Mat3& target_cov) {
  return GaussianTerm{source, target, combined_information(T, source_cov, target_cov), 1.0};
}

GaussianTerm vgicp_term(const Pose& T, const Vec3& source, const Mat3& source_cov, const GaussianVoxel& voxel) {
  return GaussianTerm{source, voxel.mean, combined_information(T, source_cov, voxel.cov),
                      static_cast<double>(voxel.n)};
}

GaussianTerm ndt_term(const Vec3& source, const NdtCell& cell) {
  return GaussianTerm{source, cell.mean, cell.information, 0.5};
}

void ndt_newton_terms(const Pose& T, const Vec3& source, const Vec3& mean, const Mat3& information, Vec6& gradient,
                      Mat6& hessian) {
  const Vec3 r = residual(T, source, mean);
  const Mat36 J = residual_jacobian(T, source);
  const Vec3 a = information * r;
  gradient = J.transpose() * a;
  hessian = J.transpose() * information * J;

  // Second-order part of q(delta) = R * exp(delta) * p + t, contracted with a.
  const Vec3 c = T.rotation.transpose() * a;
  const Mat3 ww = 0.5 * (c * source.transpose() + source * c.transpose()) - c.dot(source) * Mat3::Identity();
  const Mat3 vw = 0.5 * skew(c);
  hessian.bottomRightCorner<3, 3>() += ww;
  hessian.topRightCorner<3, 3>() += vw;
  hessian.bottomLeftCorner<3, 3>() += vw.transpose();
}

}  // namespace factors

namespace {

void accumulate(LinearSystem& sys, const Mat36& J, const Mat3& information, const Vec3& r, double weight) {
  const Eigen::Matrix<double, 6, 3> JtI = J.transpose() * information;
  sys.H += weight * JtI * J;
  sys.b += weight * JtI * r;
  sys.cost += weight * r.dot(information * r);
  ++sys.num_factors;
}

SolverSettings solver_settings(const RegistrationParams& p) {
  SolverSettings s;
  s.max_iterations = p.max_iterations;
  s.transform_epsilon = p.transform_epsilon;
  return s;
}

double update_norm(const Pose& from, const Pose& to) {
  try {
    return se3_log(se3_inverse(from) * to).norm();
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

void copy_outcome(const SolverOutcome& o, RegistrationResult& r) {
  r.pose = o.pose;
  r.iterations = o.iterations;
  r.converged = o.converged;
  r.cost_history = o.cost_history;
  r.condition_number = o.condition_number;
  r.damped = o.damped;
}

}  // namespace

// ---------------------------------------------------------------------------
// ICP

Pose svd_rigid_solve(std::span<const PointPair> pairs) {
  if (pairs.size() < 3) {
    throw Error(ErrorCode::degenerate_correspondences, "rigid solve needs at least 3 pairs");
  }
  Vec3 ms = Vec3::Zero();
  Vec3 mt = Vec3::Zero();
  for (const auto& pr : pairs) {
    ms += pr.source;
    mt += pr.target;
  }
  const double n = static_cast<double>(pairs.size());
  ms /= n;
  mt /= n;

  Mat3 scatter = Mat3::Zero();
  Mat3 cross = Mat3::Zero();
  for (const auto& pr : pairs) {
    const Vec3 s = pr.source - ms;
    const Vec3 t = pr.target - mt;
    scatter += s * s.transpose();
    cross += s * t.transpose();
  }

  const Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter, Eigen::EigenvaluesOnly);
  const double largest = eig.eigenvalues()(2);
  if (!(largest > 0.0) || eig.eigenvalues()(1) <= 1e-12 * largest) {
    throw Error(ErrorCode::degenerate_correspondences, "rigid solve: source points are collinear");
  }

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& U = svd.matrixU();
  const Mat3& V = svd.matrixV();
  Mat3 D = Mat3::Identity();
  if ((V * U.transpose()).determinant() < 0.0) {
    D(2, 2) = -1.0;
  }
  const Mat3 R = V * D * U.transpose();
  return Pose(R, mt - R * ms);
}

double icp_objective(std::span<const Vec3> source, const KdTree& target, const Pose& T, double gate) {
  const double gate_sq = gate * gate;
  double cost = 0.0;
  for (const auto& p : source) {
    const auto nn = target.nearest(T * p, gate_sq);
    cost += nn ? nn->sq_distance : gate_sq;
  }
  return 0.5 * cost;
}

RegistrationResult icp_align(const PointCloud& source, const PointCloud& target, const Pose& init,
                             const RegistrationParams& p) {
  p.validate();
  if (source.size() < 3 || target.size() < 3) {
    throw Error(ErrorCode::insufficient_points, "icp needs at least 3 points in each cloud");
  }
  const KdTree tree(target);
  const std::vector<Vec3> src = source.positions();
  const double gate_sq = p.max_correspondence_distance * p.max_correspondence_distance;

  RegistrationResult result;
  Pose T = init;
  std::vector<PointPair> pairs;
  pairs.reserve(src.size());

  auto associate = [&](const Pose& pose) {
    pairs.clear();
    double cost = 0.0;
    for (const auto& s : src) {
      const auto nn = tree.nearest(pose * s, gate_sq);
      if (nn) {
        pairs.push_back({s, tree.point(nn->index)});
        cost += nn->sq_distance;
      } else {
        cost += gate_sq;
      }
    }
    return 0.5 * cost;
  };

  for (int iter = 0; iter < p.max_iterations; ++iter) {
    const double cost = associate(T);
    if (pairs.empty()) {
      throw Error(ErrorCode::no_overlap, "icp: no correspondences within the distance gate");
    }
    result.cost_history.push_back(cost);
    result.iterations = iter + 1;

    const Pose next = svd_rigid_solve(pairs);
    const double step = update_norm(T, next);
    T = next;
    if (step < p.transform_epsilon) {
      result.converged = true;
      break;
    }
  }

  associate(T);
  Mat6 H = Mat6::Zero();
  double residual_sum = 0.0;
  for (const auto& pr : pairs) {
    const Mat36 J = factors::residual_jacobian(T, pr.source);
    H += J.transpose() * J;
    residual_sum += (T * pr.source - pr.target).norm();
  }
  result.pose = T;
  result.num_correspondences = pairs.size();
  result.fitness = pairs.empty() ? 0.0 : residual_sum / static_cast<double>(pairs.size());
  result.condition_number = condition_number(H);
  return result;
}

// ---------------------------------------------------------------------------
// Covariances

Mat3 regularize_covariance(const Mat3& cov, double eps, bool* was_degenerate) {
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (cov + cov.transpose()));
  const double largest = eig.eigenvalues()(2);
  if (!(largest > 0.0) || !std::isfinite(largest)) {
    if (was_degenerate) {
      *was_degenerate = true;
    }
    return eps * Mat3::Identity();
  }
  const Vec3 clamped = eig.eigenvalues().cwiseMax(eps * largest);
  const Mat3& V = eig.eigenvectors();
  Mat3 out = V * clamped.asDiagonal() * V.transpose();
  return 0.5 * (out + out.transpose());
}

CovarianceSet point_covariances(std::span<const Vec3> points, const KdTree& tree, int k, double eps) {
  if (k <= 0) {
    throw Error(ErrorCode::invalid_argument, "covariance neighbor count must be positive");
  }
  if (tree.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::insufficient_points, "cloud has fewer points than the covariance neighborhood");
  }
  CovarianceSet out;
  out.covariances.reserve(points.size());
  for (const auto& p : points) {
    const auto nbrs = tree.knn(p, static_cast<std::size_t>(k));
    Vec3 mean = Vec3::Zero();
    for (const auto& nb : nbrs) {
      mean += tree.point(nb.index);
    }
    mean /= static_cast<double>(nbrs.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& nb : nbrs) {
      const Vec3 d = tree.point(nb.index) - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(nbrs.size());
    bool degenerate = false;
    out.covariances.push_back(regularize_covariance(cov, eps, &degenerate));
    if (degenerate) {
      ++out.degenerate_neighborhoods;
    }
  }
  return out;
}

CovarianceSet point_covariances(const PointCloud& c, int k, double eps) {
  if (c.size() < static_cast<std::size_t>(std::max(k, 1))) {
    throw Error(ErrorCode::insufficient_points, "cloud has fewer points than the covariance neighborhood");
  }
  const auto pts = c.positions();
  const KdTree tree(pts);
  return point_covariances(pts, tree, k, eps);
}

// ---------------------------------------------------------------------------
// G-ICP

namespace {

class GicpProblem {
public:
  GicpProblem(std::span<const Vec3> source, std::span<const Mat3> source_covs, const KdTree& target,
              std::span<const Mat3> target_covs, double gate)
  : source_(source), source_covs_(source_covs), target_(target), target_covs_(target_covs), gate_sq_(gate * gate) {}

  LinearSystem linearize(const Pose& T) {
    terms_.clear();
    LinearSystem sys;
    for (std::size_t i = 0; i < source_.size(); ++i) {
      const Vec3 q = T * source_[i];
      const auto nn = target_.nearest(q, gate_sq_);
      if (!nn) {
        continue;
      }
      const Vec3& t = target_.point(nn->index);
      const Mat3 info = factors::combined_information(T, source_covs_[i], target_covs_[nn->index], &fallback_);
      terms_.push_back({source_[i], t, info, 1.0});
      accumulate(sys, factors::residual_jacobian(T, source_[i]), info, q - t, 1.0);
    }
    if (terms_.empty()) {
      throw Error(ErrorCode::no_overlap, "gicp: no correspondences within the distance gate");
    }
    return sys;
  }

  double evaluate(const Pose& T) const {
    double cost = 0.0;
    for (const auto& term : terms_) {
      cost += term.cost(T);
    }
    return cost;
  }

  const std::vector<factors::GaussianTerm>& terms() const { return terms_; }
  bool fallback() const { return fallback_; }

private:
  std::span<const Vec3> source_;
  std::span<const Mat3> source_covs_;
  const KdTree& target_;
  std::span<const Mat3> target_covs_;
  double gate_sq_;
  bool fallback_ = false;
  std::vector<factors::GaussianTerm> terms_;
};

template <typename Problem>
void finish(Problem& problem, RegistrationResult& result) {
  problem.linearize(result.pose);
  double sum = 0.0;
  for (const auto& term : problem.terms()) {
    sum += factors::residual(result.pose, term.source, term.target).norm();
  }
  result.num_correspondences = problem.terms().size();
  result.fitness = result.num_correspondences ? sum / static_cast<double>(result.num_correspondences) : 0.0;
}

}  // namespace

GaussianCloud prepare_gaussian_cloud(const PointCloud& cloud, const RegistrationParams& p) {
  p.validate();
  if (cloud.size() < static_cast<std::size_t>(p.covariance_k)) {
    throw Error(ErrorCode::insufficient_points, "cloud has fewer than covariance_k points");
  }
  GaussianCloud out{KdTree(cloud.positions()), {}};
  out.covariances = point_covariances(out.tree.points(), out.tree, p.covariance_k, p.cov_regularization);
  return out;
}

RegistrationResult gicp_align(const GaussianCloud& source, const GaussianCloud& target, const Pose& init,
                              const RegistrationParams& p) {
  p.validate();
  GicpProblem problem(source.points(), source.covariances.covariances, target.tree, target.covariances.covariances,
                      p.max_correspondence_distance);
  RegistrationResult result;
  copy_outcome(solve_pose(problem, init, solver_settings(p)), result);
  finish(problem, result);
  result.regularization_fallback = problem.fallback();
  return result;
}

RegistrationResult gicp_align(const PointCloud& source, const PointCloud& target, const Pose& init,
                              const RegistrationParams& p) {
  p.validate();
  const auto k = static_cast<std::size_t>(p.covariance_k);
  if (source.size() < k || target.size() < k) {
    throw Error(ErrorCode::insufficient_points, "gicp needs at least covariance_k points in each cloud");
  }
  return gicp_align(prepare_gaussian_cloud(source, p), prepare_gaussian_cloud(target, p), init, p);
}

// ---------------------------------------------------------------------------
// VGICP

const GaussianVoxel* GaussianVoxelMap::find(const Vec3& p) const {
  const auto it = voxels.find(cell_key(p, resolution));
  return it == voxels.end() ? nullptr : &it->second;
}

GaussianVoxelMap build_gaussian_voxels(std::span<const Vec3> points, std::span<const Mat3> covariances,
                                       double resolution) {
  if (points.size() != covariances.size()) {
    throw Error(ErrorCode::invalid_argument, "one covariance per point is required");
  }
  GaussianVoxelMap map;
  map.resolution = resolution;
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& voxel = map.voxels[cell_key(points[i], resolution)];
    voxel.mean += points[i];
    voxel.cov += covariances[i];
    ++voxel.n;
  }
  for (auto& [key, voxel] : map.voxels) {
    const double n = static_cast<double>(voxel.n);
    voxel.mean /= n;
    voxel.cov /= n;
  }
  return map;
}

namespace {

class VgicpProblem {
public:
  VgicpProblem(std::span<const Vec3> source, std::span<const Mat3> source_covs, const GaussianVoxelMap& target)
  : source_(source), source_covs_(source_covs), target_(target) {}

  LinearSystem linearize(const Pose& T) {
    terms_.clear();
    LinearSystem sys;
    for (std::size_t i = 0; i < source_.size(); ++i) {
      const Vec3 q = T * source_[i];
      const GaussianVoxel* voxel = target_.find(q);
      if (!voxel) {
        continue;
      }
      const Mat3 info = factors::combined_information(T, source_covs_[i], voxel->cov, &fallback_);
      const double w = static_cast<double>(voxel->n);
      terms_.push_back({source_[i], voxel->mean, info, w});
      accumulate(sys, factors::residual_jacobian(T, source_[i]), info, q - voxel->mean, w);
    }
    if (terms_.empty()) {
      throw Error(ErrorCode::no_overlap, "vgicp: no source point falls into a populated voxel");
    }
    return sys;
  }

  double evaluate(const Pose& T) const {
    double cost = 0.0;
    for (const auto& term : terms_) {
      cost += term.cost(T);
    }
    return cost;
  }

  const std::vector<factors::GaussianTerm>& terms() const { return terms_; }
  bool fallback() const { return fallback_; }

private:
  std::span<const Vec3> source_;
  std::span<const Mat3> source_covs_;
  const GaussianVoxelMap& target_;
  bool fallback_ = false;
  std::vector<factors::GaussianTerm> terms_;
};

}  // namespace

RegistrationResult vgicp_align(const GaussianCloud& source, const GaussianCloud& target, const Pose& init,
                               const RegistrationParams& p) {
  p.validate();
  const auto voxels = build_gaussian_voxels(target.points(), target.covariances.covariances, p.voxel_resolution);
  VgicpProblem problem(source.points(), source.covariances.covariances, voxels);
  RegistrationResult result;
  copy_outcome(solve_pose(problem, init, solver_settings(p)), result);
  finish(problem, result);
  result.regularization_fallback = problem.fallback();
  return result;
}

RegistrationResult vgicp_align(const PointCloud& source, const PointCloud& target, const Pose& init,
                               const RegistrationParams& p) {
  p.validate();
  const auto k = static_cast<std::size_t>(p.covariance_k);
  if (source.size() < k || target.size() < k) {
    throw Error(ErrorCode::insufficient_points, "vgicp needs at least covariance_k points in each cloud");
  }
  return vgicp_align(prepare_gaussian_cloud(source, p), prepare_gaussian_cloud(target, p), init, p);
}

// ---------------------------------------------------------------------------
// NDT

const NdtCell* NdtMap::find(const Vec3& p) const {
  const auto it = cells.find(cell_key(p, resolution));
  return it == cells.end() ? nullptr : &it->second;
}

NdtMap build_ndt_map(const PointCloud& target, double resolution, int min_points, double eps) {
  const VoxelGrid grid = voxel_stats(voxel_partition(target, resolution));
  NdtMap map;
  map.resolution = resolution;
  for (const auto& [key, cell] : grid.cells()) {
    if (cell.n < static_cast<std::size_t>(min_points)) {
      continue;
    }
    NdtCell out;
    out.mean = cell.mean;
    out.cov = regularize_covariance(cell.cov, eps);
    out.information = Eigen::LLT<Mat3>(out.cov).solve(Mat3::Identity());
    out.n = cell.n;
    map.cells.emplace(key, out);
  }
  if (map.cells.empty()) {
    throw Error(ErrorCode::insufficient_structure, "ndt: no cell holds the minimum number of points");
  }
  return map;
}

namespace {

class NdtProblem {
public:
  NdtProblem(std::span<const Vec3> source, const NdtMap& target) : source_(source), target_(target) {}

  LinearSystem linearize(const Pose& T) {
    terms_.clear();
    LinearSystem sys;
    Vec6 g;
    Mat6 h;
    for (const auto& p : source_) {
      const Vec3 q = T * p;
      const NdtCell* cell = target_.find(q);
      if (!cell) {
        continue;
      }
      terms_.push_back(factors::ndt_term(p, *cell));
      factors::ndt_newton_terms(T, p, cell->mean, cell->information, g, h);
      sys.b += g;
      sys.H += h;
      sys.cost += terms_.back().cost(T);
      ++sys.num_factors;
    }
    if (terms_.empty()) {
      throw Error(ErrorCode::no_overlap, "ndt: no source point falls into a qualifying cell");
    }
    return sys;
  }

  double evaluate(const Pose& T) const {
    double cost = 0.0;
    for (const auto& term : terms_) {
      cost += term.cost(T);
    }
    return cost;
  }

  const std::vector<factors::GaussianTerm>& terms() const { return terms_; }

private:
  std::span<const Vec3> source_;
  const NdtMap& target_;
  std::vector<factors::GaussianTerm> terms_;
};

}  // namespace

RegistrationResult ndt_align(const PointCloud& source, const PointCloud& target, const Pose& init,
                             const RegistrationParams& p) {
  p.validate();
  if (source.empty()) {
    throw Error(ErrorCode::empty_input, "ndt: empty source cloud");
  }
  const NdtMap map = build_ndt_map(target, p.voxel_resolution, p.min_points_per_cell, p.cov_regularization);
  const auto src = source.positions();

  NdtProblem problem(src, map);
  auto settings = solver_settings(p);
  settings.regularize_hessian = true;
  RegistrationResult result;
  copy_outcome(solve_pose(problem, init, settings), result);
  finish(problem, result);
  return result;
}

}  // namespace lodom
