#include <lodom/feature_registration.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <optional>

#include <Eigen/Eigenvalues>

#include <lodom/error.hpp>
#include <lodom/kdtree.hpp>
#include <lodom/optimizer.hpp>

namespace lodom {

namespace {

struct EdgeFactor {
  Vec3 source;
  Vec3 point;
  Vec3 direction;  // unit
  double weight = 1.0;

  Vec3 residual(const Pose& T) const {
    const Vec3 d = T * source - point;
    return d - direction * direction.dot(d);
  }
};

struct PlaneFactor {
  Vec3 source;
  Vec3 point;
  Vec3 normal;  // unit
  double weight = 1.0;

  double residual(const Pose& T) const { return normal.dot(T * source - point); }
};

Mat36 point_jacobian(const Pose& T, const Vec3& p) {
  Mat36 J;
  J.leftCols<3>() = T.rotation;
  J.rightCols<3>() = -T.rotation * skew(p);
  return J;
}

struct FactorSet {
  std::vector<EdgeFactor> edges;
  std::vector<PlaneFactor> planes;

  std::size_t size() const { return edges.size() + planes.size(); }

  double cost(const Pose& T) const {
    double c = 0.0;
    for (const auto& f : edges) {
      c += f.weight * f.residual(T).squaredNorm();
    }
    for (const auto& f : planes) {
      const double r = f.residual(T);
      c += f.weight * r * r;
    }
    return c;
  }

  LinearSystem system(const Pose& T) const {
    LinearSystem sys;
    for (const auto& f : edges) {
      const Mat3 P = Mat3::Identity() - f.direction * f.direction.transpose();
      const Mat36 J = P * point_jacobian(T, f.source);
      const Vec3 r = f.residual(T);
      sys.H += f.weight * J.transpose() * J;
      sys.b += f.weight * J.transpose() * r;
      sys.cost += f.weight * r.squaredNorm();
    }
    for (const auto& f : planes) {
      const Vec6 J = point_jacobian(T, f.source).transpose() * f.normal;
      const double r = f.residual(T);
      sys.H += f.weight * J * J.transpose();
      sys.b += f.weight * J * r;
      sys.cost += f.weight * r * r;
    }
    sys.num_factors = size();
    return sys;
  }

  double mean_distance(const Pose& T) const {
    if (size() == 0) {
      return 0.0;
    }
    double sum = 0.0;
    for (const auto& f : edges) {
      sum += f.residual(T).norm();
    }
    for (const auto& f : planes) {
      sum += std::abs(f.residual(T));
    }
    return sum / static_cast<double>(size());
  }
};

/// Weight of a residual at a given solver iteration: unit first, bisquare afterwards.
double residual_weight(double distance, int iteration, const FeatureParams& p) {
  if (iteration < p.unweighted_iterations) {
    return 1.0;
  }
  const double w = bisquare_weight(distance, p.weight_scale);
  return w * w;
}

/// Nearest-neighbor search over feature points, globally and per ring.
class RingIndex {
public:
  explicit RingIndex(const std::vector<FeaturePoint>& features) {
    points_.reserve(features.size());
    for (const auto& f : features) {
      points_.push_back(f.xyz);
      rings_.push_back(f.ring);
    }
    if (points_.empty()) {
      return;
    }
    all_ = std::make_unique<KdTree>(points_);
    const int max_ring = *std::max_element(rings_.begin(), rings_.end());
    members_.resize(static_cast<std::size_t>(std::max(max_ring, -1) + 1));
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (rings_[i] >= 0) {
        members_[static_cast<std::size_t>(rings_[i])].push_back(i);
      }
    }
    per_ring_.resize(members_.size());
    for (std::size_t r = 0; r < members_.size(); ++r) {
      if (members_[r].empty()) {
        continue;
      }
      std::vector<Vec3> pts;
      for (std::size_t i : members_[r]) {
        pts.push_back(points_[i]);
      }
      per_ring_[r] = std::make_unique<KdTree>(std::move(pts));
    }
  }

  bool empty() const { return points_.empty(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }
  int ring(std::size_t i) const { return rings_[i]; }

  std::optional<Neighbor> nearest(const Vec3& q, double max_sq) const {
    return all_ ? all_->nearest(q, max_sq) : std::nullopt;
  }

  /// Nearest point of `ring` other than `exclude`, as a global index.
  std::optional<Neighbor> nearest_in_ring(int ring, const Vec3& q, double max_sq, std::size_t exclude) const {
    if (ring < 0 || static_cast<std::size_t>(ring) >= per_ring_.size() || !per_ring_[static_cast<std::size_t>(ring)]) {
      return std::nullopt;
    }
    const auto& tree = *per_ring_[static_cast<std::size_t>(ring)];
    const auto& members = members_[static_cast<std::size_t>(ring)];
    for (const auto& nb : tree.knn(q, 2, max_sq)) {
      const std::size_t global = members[nb.index];
      if (global != exclude) {
        return Neighbor{global, nb.sq_distance};
      }
    }
    return std::nullopt;
  }

  /// Nearest point over rings within `window` of `ring`, excluding `ring` itself.
  std::optional<Neighbor> nearest_near_ring(int ring, int window, const Vec3& q, double max_sq) const {
    std::optional<Neighbor> best;
    for (int r = ring - window; r <= ring + window; ++r) {
      if (r == ring) {
        continue;
      }
      const auto nb = nearest_in_ring(r, q, max_sq, static_cast<std::size_t>(-1));
      if (nb && (!best || nb->sq_distance < best->sq_distance ||
                 (nb->sq_distance == best->sq_distance && nb->index < best->index))) {
        best = nb;
      }
    }
    return best;
  }

private:
  std::vector<Vec3> points_;
  std::vector<int> rings_;
  std::unique_ptr<KdTree> all_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::unique_ptr<KdTree>> per_ring_;
};

/// Scan-to-scan correspondences at pose T.
class ScanAssociator {
public:
  ScanAssociator(const FeatureSet& curr, const FeatureSet& prev, const FeatureParams& p, bool use_edges = true,
                 bool use_planes = true)
  : curr_(curr), edges_(prev.map_edges), planars_(prev.map_planars), p_(p), use_edges_(use_edges),
    use_planes_(use_planes) {}

  FactorSet operator()(const Pose& T, int iteration) const {
    FactorSet out;
    const double gate_sq = p_.correspondence_distance * p_.correspondence_distance;
    if (use_edges_ && !edges_.empty()) {
      for (const auto& e : curr_.edges) {
        const Vec3 q = T * e.xyz;
        const auto j = edges_.nearest(q, gate_sq);
        if (!j) {
          continue;
        }
        const auto l = edges_.nearest_near_ring(edges_.ring(j->index), p_.ring_search_window, q, gate_sq);
        if (!l) {
          continue;
        }
        const Vec3& a = edges_.point(j->index);
        const Vec3& b = edges_.point(l->index);
        const double len = (b - a).norm();
        if (len < 1e-6) {
          continue;
        }
        EdgeFactor f{e.xyz, a, (b - a) / len, 1.0};
        f.weight = residual_weight(f.residual(T).norm(), iteration, p_);
        out.edges.push_back(f);
      }
    }
    if (use_planes_ && !planars_.empty()) {
      for (const auto& s : curr_.planars) {
        const Vec3 q = T * s.xyz;
        const auto j = planars_.nearest(q, gate_sq);
        if (!j) {
          continue;
        }
        const int rj = planars_.ring(j->index);
        const auto l = planars_.nearest_in_ring(rj, q, gate_sq, j->index);
        const auto m = planars_.nearest_near_ring(rj, p_.ring_search_window, q, gate_sq);
        if (!l || !m) {
          continue;
        }
        const Vec3& a = planars_.point(j->index);
        const Vec3& b = planars_.point(l->index);
        const Vec3& c = planars_.point(m->index);
        const Vec3 n = (a - b).cross(a - c);
        // Reject nearly collinear triples (sine of the spanned angle below 0.05).
        if (!(n.norm() > 0.05 * (a - b).norm() * (a - c).norm())) {
          continue;
        }
        PlaneFactor f{s.xyz, a, n.normalized(), 1.0};
        f.weight = residual_weight(std::abs(f.residual(T)), iteration, p_);
        out.planes.push_back(f);
      }
    }
    return out;
  }

private:
  const FeatureSet& curr_;
  RingIndex edges_;
  RingIndex planars_;
  const FeatureParams& p_;
  bool use_edges_;
  bool use_planes_;
};

std::size_t active_count(const FactorSet& f) {
  std::size_t n = 0;
  for (const auto& e : f.edges) n += e.weight > 0.0 ? 1 : 0;
  for (const auto& e : f.planes) n += e.weight > 0.0 ? 1 : 0;
  return n;
}

template <typename Associator>
class FeatureProblem {
public:
  explicit FeatureProblem(const Associator& associate) : associate_(associate) {}

  LinearSystem linearize(const Pose& T) {
    factors_ = associate_(T, iteration_);
    const std::size_t n = active_count(factors_);
    if (n < 6) {
      throw Error(ErrorCode::underconstrained,
                  "only " + std::to_string(n) + " feature correspondences (need 6)");
    }
    LinearSystem sys = factors_.system(T);
    if (iteration_ == 0) {
      const double cond = condition_number(sys.H);
      if (!(cond <= kUnderconstrainedCondition)) {
        throw Error(ErrorCode::underconstrained,
                    "feature normal matrix is rank deficient (condition number " + std::to_string(cond) + ")");
      }
    }
    ++iteration_;
    return sys;
  }

  double evaluate(const Pose& T) const { return factors_.cost(T); }
  const FactorSet& factors() const { return factors_; }
  int iteration() const { return iteration_; }
  void skip_to(int iteration) { iteration_ = std::max(iteration_, iteration); }

private:
  const Associator& associate_;
  FactorSet factors_;
  int iteration_ = 0;
};

SolverSettings feature_solver_settings(const FeatureParams& p) {
  SolverSettings s;
  s.max_iterations = p.max_iterations;
  s.transform_epsilon = p.transform_epsilon;
  return s;
}

template <typename Associator>
RegistrationResult solve_features(const Associator& associate, const Pose& init, const FeatureParams& p) {
  FeatureProblem<Associator> problem(associate);
  SolverSettings settings = feature_solver_settings(p);
  SolverOutcome o = solve_pose(problem, init, settings);
  // Convergence under unit weights is not final: outlier associations bias that optimum,
  // so the weighted phase still runs from there.
  if (problem.iteration() <= p.unweighted_iterations && o.iterations < p.max_iterations) {
    problem.skip_to(p.unweighted_iterations);
    settings.max_iterations = p.max_iterations - o.iterations;
    const SolverOutcome w = solve_pose(problem, o.pose, settings);
    o.cost_history.insert(o.cost_history.end(), w.cost_history.begin(), w.cost_history.end());
    o.iterations += w.iterations;
    o.pose = w.pose;
    o.converged = w.converged;
    o.condition_number = w.condition_number;
    o.damped = o.damped || w.damped;
    o.last_update_norm = w.last_update_norm;
  }
  RegistrationResult r;
  r.pose = o.pose;
  r.iterations = o.iterations;
  r.converged = o.converged;
  r.cost_history = o.cost_history;
  r.condition_number = o.condition_number;
  r.damped = o.damped;
  r.num_correspondences = problem.factors().size();
  r.fitness = problem.factors().mean_distance(o.pose);
  return r;
}

std::vector<FeaturePoint> downsample(const std::vector<FeaturePoint>& pts, double cell) {
  std::unordered_set<CellKey, CellKeyHash> seen;
  std::vector<FeaturePoint> out;
  for (const auto& f : pts) {
    if (seen.insert(cell_key(f.xyz, cell)).second) {
      out.push_back(f);
    }
  }
  return out;
}

/// Scan-to-map correspondences: principal-axis lines and least-squares planes.
class MapAssociator {
public:
  MapAssociator(const std::vector<FeaturePoint>& edges, const std::vector<FeaturePoint>& planars,
                const FeatureMap& map, const FeatureParams& p)
  : edges_(edges), planars_(planars), p_(p) {
    if (!map.edges().empty()) {
      edge_tree_ = std::make_unique<KdTree>(map.edges());
    }
    if (!map.planars().empty()) {
      planar_tree_ = std::make_unique<KdTree>(map.planars());
    }
  }

  FactorSet operator()(const Pose& T, int iteration) const {
    FactorSet out;
    const auto k = static_cast<std::size_t>(p_.map_neighbors);
    const double max_sq = p_.map_neighbor_distance * p_.map_neighbor_distance;
    if (edge_tree_) {
      for (const auto& e : edges_) {
        const Vec3 q = T * e.xyz;
        const auto nbrs = edge_tree_->knn(q, k, max_sq);
        if (nbrs.size() < k) {
          continue;
        }
        Vec3 mean;
        const auto eig = fit(*edge_tree_, nbrs, mean);
        const auto& ev = eig.eigenvalues();
        if (!(ev(2) > p_.line_eigen_ratio * ev(1))) {
          continue;
        }
        EdgeFactor f{e.xyz, mean, eig.eigenvectors().col(2).normalized(), 1.0};
        f.weight = residual_weight(f.residual(T).norm(), iteration, p_);
        out.edges.push_back(f);
      }
    }
    if (planar_tree_) {
      for (const auto& s : planars_) {
        const Vec3 q = T * s.xyz;
        const auto nbrs = planar_tree_->knn(q, k, max_sq);
        if (nbrs.size() < k) {
          continue;
        }
        Vec3 mean;
        const auto eig = fit(*planar_tree_, nbrs, mean);
        const auto& ev = eig.eigenvalues();
        if (!(ev(1) > 1e-6 * ev(2))) {
          continue;  // collinear neighborhood
        }
        const Vec3 normal = eig.eigenvectors().col(0).normalized();
        bool flat = true;
        for (const auto& nb : nbrs) {
          if (std::abs(normal.dot(planar_tree_->point(nb.index) - mean)) > p_.plane_fit_tolerance) {
            flat = false;
            break;
          }
        }
        if (!flat) {
          continue;
        }
        PlaneFactor f{s.xyz, mean, normal, 1.0};
        f.weight = residual_weight(std::abs(f.residual(T)), iteration, p_);
        out.planes.push_back(f);
      }
    }
    return out;
  }

private:
  static Eigen::SelfAdjointEigenSolver<Mat3> fit(const KdTree& tree, const std::vector<Neighbor>& nbrs, Vec3& mean) {
    mean.setZero();
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
    return Eigen::SelfAdjointEigenSolver<Mat3>(cov);
  }

  std::vector<FeaturePoint> edges_;
  std::vector<FeaturePoint> planars_;
  const FeatureParams& p_;
  std::unique_ptr<KdTree> edge_tree_;
  std::unique_ptr<KdTree> planar_tree_;
};

}  // namespace

RegistrationResult feature_odometry(const FeatureSet& curr, const FeatureSet& prev, const Pose& init,
                                    const FeatureParams& p) {
  p.validate();
  const ScanAssociator associate(curr, prev, p);
  return solve_features(associate, init, p);
}

double feature_objective(const FeatureSet& curr, const FeatureSet& prev, const Pose& at, const Pose& T,
                         const FeatureParams& p) {
  const ScanAssociator associate(curr, prev, p);
  return associate(at, p.unweighted_iterations).cost(T);
}

std::size_t FeatureMap::insert(const FeatureSet& world) {
  std::size_t added = 0;
  for (const auto& f : world.map_edges) {
    if (edge_cells_.insert(cell_key(f.xyz, edge_cell_)).second) {
      edges_.push_back(f.xyz);
      ++added;
    }
  }
  for (const auto& f : world.map_planars) {
    if (planar_cells_.insert(cell_key(f.xyz, planar_cell_)).second) {
      planars_.push_back(f.xyz);
      ++added;
    }
  }
  return added;
}

MappingResult feature_mapping(const FeatureSet& curr, FeatureMap map, const Pose& init_world, const FeatureParams& p) {
  p.validate();
  MappingResult out;
  out.pose = init_world;
  out.registration.pose = init_world;
  if (map.empty()) {
    out.seeded = true;
    out.registration.converged = true;
  } else {
    const MapAssociator associate(downsample(curr.map_edges, map.edge_cell()),
                                  downsample(curr.map_planars, map.planar_cell()), map, p);
    try {
      out.registration = solve_features(associate, init_world, p);
      out.pose = out.registration.pose;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::underconstrained) {
        throw;
      }
      out.registration.fallback = true;
      out.registration.fallback_reason = e.what();
    }
  }
  map.insert(transform_features(out.pose, curr));
  out.map = std::move(map);
  return out;
}

// ---------------------------------------------------------------------------
// Two-stage solver

EulerPose euler_from_pose(const Pose& T) {
  const Mat3& R = T.rotation;
  EulerPose e;
  e.x = T.translation.x();
  e.y = T.translation.y();
  e.z = T.translation.z();
  e.pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  e.roll = std::atan2(R(2, 1), R(2, 2));
  e.yaw = std::atan2(R(1, 0), R(0, 0));
  return e;
}

Pose pose_from_euler(const EulerPose& e) {
  const Mat3 R = (Eigen::AngleAxisd(e.yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(e.pitch, Vec3::UnitY()) *
                  Eigen::AngleAxisd(e.roll, Vec3::UnitX()))
                     .toRotationMatrix();
  return Pose(R, Vec3(e.x, e.y, e.z));
}

LegoFrame extract_lego_features(const PointCloud& scan, const SensorModel& sensor, const FeatureParams& p,
                                const GroundParams& gp) {
  LegoFrame frame;
  frame.segmentation = ground_segment(scan, sensor, gp);
  std::vector<bool> edge_allowed(scan.size());
  std::vector<bool> planar_allowed(scan.size());
  for (std::size_t i = 0; i < scan.size(); ++i) {
    edge_allowed[i] = frame.segmentation.cluster_id[i] >= 0;
    planar_allowed[i] = frame.segmentation.ground[i];
  }
  frame.features = extract_features(scan, p, edge_allowed, planar_allowed);
  return frame;
}

namespace {

using Params6 = std::array<double, 6>;  // x, y, z, roll, pitch, yaw

Params6 to_array(const EulerPose& e) { return {e.x, e.y, e.z, e.roll, e.pitch, e.yaw}; }
EulerPose from_array(const Params6& a) { return {a[0], a[1], a[2], a[3], a[4], a[5]}; }

/// Right-perturbation twist produced by a unit change of each Euler parameter.
Eigen::Matrix<double, 6, 6> euler_jacobian(const Params6& a) {
  const Mat3 Rx = Eigen::AngleAxisd(a[3], Vec3::UnitX()).toRotationMatrix();
  const Mat3 Ry = Eigen::AngleAxisd(a[4], Vec3::UnitY()).toRotationMatrix();
  const Mat3 Rz = Eigen::AngleAxisd(a[5], Vec3::UnitZ()).toRotationMatrix();
  const Mat3 R = Rz * Ry * Rx;
  Eigen::Matrix<double, 6, 6> D = Eigen::Matrix<double, 6, 6>::Zero();
  D.block<3, 3>(0, 0) = R.transpose();
  D.block<3, 1>(3, 3) = Vec3::UnitX();
  D.block<3, 1>(3, 4) = Rx.transpose() * Vec3::UnitY();
  D.block<3, 1>(3, 5) = (Ry * Rx).transpose() * Vec3::UnitZ();
  return D;
}

struct SubsetOutcome {
  Params6 params{};
  int iterations = 0;
  bool converged = false;
  bool damped = false;
  std::vector<double> cost_history;
  double condition_number = std::numeric_limits<double>::infinity();
  std::size_t correspondences = 0;
  double fitness = 0.0;
};

/// Damped Gauss-Newton over three of the six Euler parameters.
template <typename Associator>
SubsetOutcome solve_subset(const Associator& associate, Params6 params, const std::array<int, 3>& active,
                           const FeatureParams& p) {
  SubsetOutcome out;
  FactorSet factors;
  for (int iter = 0; iter < p.max_iterations; ++iter) {
    const Pose T = pose_from_euler(from_array(params));
    factors = associate(T, iter);
    if (active_count(factors) < 3) {
      throw Error(ErrorCode::underconstrained, "fewer than 3 correspondences for a 3-parameter stage");
    }
    const LinearSystem sys = factors.system(T);
    const auto Dfull = euler_jacobian(params);
    Eigen::Matrix<double, 6, 3> D;
    for (int k = 0; k < 3; ++k) {
      D.col(k) = Dfull.col(active[static_cast<std::size_t>(k)]);
    }
    const Mat3 H = D.transpose() * sys.H * D;
    const Vec3 b = D.transpose() * sys.b;
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(H, Eigen::EigenvaluesOnly);
    out.condition_number = eig.eigenvalues()(0) > 0.0 ? eig.eigenvalues()(2) / eig.eigenvalues()(0)
                                                       : std::numeric_limits<double>::infinity();
    if (iter == 0 && !(out.condition_number <= kUnderconstrainedCondition)) {
      throw Error(ErrorCode::underconstrained, "stage normal matrix is rank deficient");
    }
    out.cost_history.push_back(sys.cost);
    out.iterations = iter + 1;

    const double scale = std::max(H.diagonal().cwiseAbs().maxCoeff(), 1e-12);
    double lambda = out.condition_number > 1e8 ? 1e-6 * scale : 0.0;
    bool accepted = false;
    Vec3 dx = Vec3::Zero();
    for (int trial = 0; trial < 12; ++trial) {
      Mat3 A = H;
      A.diagonal().array() += lambda;
      dx = A.ldlt().solve(-b);
      if (dx.allFinite()) {
        Params6 cand = params;
        for (int k = 0; k < 3; ++k) {
          cand[static_cast<std::size_t>(active[static_cast<std::size_t>(k)])] += dx(k);
        }
        if (factors.cost(pose_from_euler(from_array(cand))) <= sys.cost) {
          params = cand;
          accepted = true;
          break;
        }
      }
      lambda = lambda > 0.0 ? lambda * 10.0 : 1e-4 * scale;
      out.damped = true;
    }
    if (!accepted || dx.norm() < p.transform_epsilon) {
      if (iter < p.unweighted_iterations) {
        iter = p.unweighted_iterations - 1;  // go straight to the weighted phase
        continue;
      }
      out.converged = true;
      break;
    }
  }
  out.params = params;
  const Pose T = pose_from_euler(from_array(params));
  out.correspondences = factors.size();
  out.fitness = factors.mean_distance(T);
  return out;
}

}  // namespace

LegoResult lego_two_stage(const LegoFrame& curr, const LegoFrame& prev, const Pose& init, const FeatureParams& p) {
  p.validate();
  LegoResult out;
  if (curr.features.planars.empty() || prev.features.map_planars.empty()) {
    out.registration = feature_odometry(curr.features, prev.features, init, p);
    out.registration.fallback = true;
    out.registration.fallback_reason = "no ground features; full 6-DoF feature odometry used";
    out.stage1 = out.stage2 = euler_from_pose(out.registration.pose);
    return out;
  }

  Params6 params = to_array(euler_from_pose(init));

  const ScanAssociator ground(curr.features, prev.features, p, false, true);
  const SubsetOutcome s1 = solve_subset(ground, params, {2, 3, 4}, p);
  params = s1.params;
  out.stage1 = from_array(params);
  out.stage1_iterations = s1.iterations;

  RegistrationResult& r = out.registration;
  r.cost_history = s1.cost_history;
  r.damped = s1.damped;
  r.converged = s1.converged;
  r.num_correspondences = s1.correspondences;
  r.fitness = s1.fitness;
  r.condition_number = s1.condition_number;

  try {
    const ScanAssociator edges(curr.features, prev.features, p, true, false);
    const SubsetOutcome s2 = solve_subset(edges, params, {0, 1, 5}, p);
    params = s2.params;
    out.stage2_iterations = s2.iterations;
    r.cost_history.insert(r.cost_history.end(), s2.cost_history.begin(), s2.cost_history.end());
    r.damped = r.damped || s2.damped;
    r.converged = r.converged && s2.converged;
    r.num_correspondences += s2.correspondences;
    r.fitness = (s1.fitness * static_cast<double>(s1.correspondences) +
                 s2.fitness * static_cast<double>(s2.correspondences)) /
                static_cast<double>(std::max<std::size_t>(r.num_correspondences, 1));
    r.condition_number = std::max(s1.condition_number, s2.condition_number);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::underconstrained) {
      throw;
    }
    r.fallback = true;
    r.fallback_reason = std::string("stage two underconstrained; [x, y, yaw] kept at init: ") + e.what();
  }
  out.stage2 = from_array(params);
  r.iterations = out.stage1_iterations + out.stage2_iterations;
  r.pose = pose_from_euler(out.stage2);
  return out;
}

}  // namespace lodom
