#include <lodom/features.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <lodom/error.hpp>

namespace lodom {

void FeatureParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) {
      throw Error(ErrorCode::invalid_argument, std::string("feature params: ") + what);
    }
  };
  require(subregions_per_ring >= 4 && subregions_per_ring <= 8, "subregions_per_ring must be in [4, 8]");
  require(edge_threshold > 0.0, "edge_threshold must be positive");
  require(edges_per_subregion > 0 && planars_per_subregion > 0, "feature counts must be positive");
  require(neighborhood_half_width > 0, "neighborhood_half_width must be positive");
  require(mapping_edge_multiplier > 0, "mapping_edge_multiplier must be positive");
  require(occlusion_gap > 0.0 && parallel_beam_ratio > 0.0, "outlier thresholds must be positive");
  require(weight_scale > 0.0, "weight_scale must be positive");
  require(unweighted_iterations >= 0, "unweighted_iterations must be non-negative");
  require(correspondence_distance > 0.0, "correspondence_distance must be positive");
  require(ring_search_window > 0, "ring_search_window must be positive");
  require(max_iterations > 0 && transform_epsilon > 0.0, "solver settings must be positive");
  require(edge_map_cell > 0.0 && planar_map_cell > 0.0, "map cells must be positive");
  require(map_neighbors >= 3 && map_neighbor_distance > 0.0, "map neighborhood must hold 3 or more points");
  require(line_eigen_ratio > 1.0 && plane_fit_tolerance > 0.0, "map fit thresholds out of range");
}

FeatureSet transform_features(const Pose& T, const FeatureSet& f) {
  FeatureSet out = f;
  for (auto* set : {&out.edges, &out.planars, &out.map_edges, &out.map_planars}) {
    for (auto& fp : *set) {
      fp.xyz = T * fp.xyz;
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> ring_sequences(const PointCloud& scan) {
  std::vector<std::vector<std::size_t>> rings;
  for (std::size_t i = 0; i < scan.size(); ++i) {
    const int r = scan[i].ring;
    if (r < 0) {
      throw Error(ErrorCode::unorganized_scan, "point " + std::to_string(i) + " has no ring id");
    }
    if (static_cast<std::size_t>(r) >= rings.size()) {
      rings.resize(static_cast<std::size_t>(r) + 1);
    }
    rings[static_cast<std::size_t>(r)].push_back(i);
  }
  return rings;
}

std::vector<std::optional<double>> compute_curvature(const PointCloud& scan, const FeatureParams& p) {
  const auto rings = ring_sequences(scan);
  const int hw = p.neighborhood_half_width;
  const double ns = 2.0 * hw + 1.0;
  std::vector<std::optional<double>> out(scan.size());
  for (const auto& seq : rings) {
    const int n = static_cast<int>(seq.size());
    for (int k = hw; k < n - hw; ++k) {
      const Vec3& xi = scan[seq[k]].xyz;
      Vec3 sum = Vec3::Zero();
      for (int j = k - hw; j <= k + hw; ++j) {
        if (j != k) {
          sum += xi - scan[seq[j]].xyz;
        }
      }
      const double range = xi.norm();
      if (range > 0.0) {
        out[seq[k]] = sum.norm() / (ns * range);
      }
    }
  }
  return out;
}

std::vector<bool> reject_unreliable(const PointCloud& scan, const FeatureParams& p) {
  std::vector<bool> rejected(scan.size(), false);
  if (!p.outlier_rejection) {
    return rejected;
  }
  const auto rings = ring_sequences(scan);
  const int hw = p.neighborhood_half_width;
  for (const auto& seq : rings) {
    const int n = static_cast<int>(seq.size());
    for (int k = 0; k + 1 < n; ++k) {
      const double r0 = scan[seq[k]].xyz.norm();
      const double r1 = scan[seq[k + 1]].xyz.norm();
      if (r0 - r1 > p.occlusion_gap) {
        // k lies on the far surface, partly hidden behind k + 1.
        for (int j = std::max(0, k - hw); j <= k; ++j) {
          rejected[seq[j]] = true;
        }
      } else if (r1 - r0 > p.occlusion_gap) {
        for (int j = k + 1; j <= std::min(n - 1, k + 1 + hw); ++j) {
          rejected[seq[j]] = true;
        }
      }
    }
    for (int k = 1; k + 1 < n; ++k) {
      const Vec3& x = scan[seq[k]].xyz;
      const double limit = p.parallel_beam_ratio * x.squaredNorm();
      const double prev = (x - scan[seq[k - 1]].xyz).squaredNorm();
      const double next = (scan[seq[k + 1]].xyz - x).squaredNorm();
      if (prev > limit && next > limit) {
        rejected[seq[k]] = true;
      }
    }
  }
  return rejected;
}

FeatureSet extract_features(const PointCloud& scan, const FeatureParams& p) {
  const std::vector<bool> all(scan.size(), true);
  return extract_features(scan, p, all, all);
}

FeatureSet extract_features(const PointCloud& scan, const FeatureParams& p, const std::vector<bool>& edge_allowed,
                            const std::vector<bool>& planar_allowed) {
  p.validate();
  if (edge_allowed.size() != scan.size() || planar_allowed.size() != scan.size()) {
    throw Error(ErrorCode::invalid_argument, "feature masks must cover the scan");
  }
  const auto rings = ring_sequences(scan);
  const auto curvature = compute_curvature(scan, p);
  const auto rejected = reject_unreliable(scan, p);
  const int hw = p.neighborhood_half_width;
  const int S = p.subregions_per_ring;
  const int map_edge_budget = p.edges_per_subregion * p.mapping_edge_multiplier;

  FeatureSet out;
  for (std::size_t ring = 0; ring < rings.size(); ++ring) {
    const auto& seq = rings[ring];
    const int n = static_cast<int>(seq.size());
    if (n <= 2 * hw) {
      continue;
    }
    std::vector<bool> picked(static_cast<std::size_t>(n), false);
    auto suppress = [&](int k) {
      picked[k] = true;
      for (int l = 1; l <= hw; ++l) {
        if (k - l >= 0) picked[k - l] = true;
        if (k + l < n) picked[k + l] = true;
      }
    };
    auto make = [&](int k, int s) {
      const std::size_t idx = seq[k];
      return FeaturePoint{scan[idx].xyz, *curvature[idx], static_cast<int>(ring), s, idx};
    };

    const int span = n - 2 * hw;
    for (int s = 0; s < S; ++s) {
      const int begin = hw + span * s / S;
      const int end = hw + span * (s + 1) / S;
      std::vector<int> order;
      for (int k = begin; k < end; ++k) {
        if (curvature[seq[k]] && !rejected[seq[k]]) {
          order.push_back(k);
        }
      }
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double ca = *curvature[seq[a]];
        const double cb = *curvature[seq[b]];
        return ca != cb ? ca < cb : a < b;
      });

      int edges = 0;
      int map_edges = 0;
      for (auto it = order.rbegin(); it != order.rend() && map_edges < map_edge_budget; ++it) {
        const int k = *it;
        if (*curvature[seq[k]] <= p.edge_threshold) {
          break;
        }
        if (picked[k] || !edge_allowed[seq[k]]) {
          continue;
        }
        const FeaturePoint fp = make(k, s);
        if (edges < p.edges_per_subregion) {
          out.edges.push_back(fp);
          ++edges;
        }
        out.map_edges.push_back(fp);
        ++map_edges;
        suppress(k);
      }

      int planars = 0;
      for (int k : order) {
        if (planars >= p.planars_per_subregion || *curvature[seq[k]] >= p.edge_threshold) {
          break;
        }
        if (picked[k] || !planar_allowed[seq[k]]) {
          continue;
        }
        out.planars.push_back(make(k, s));
        ++planars;
        suppress(k);
      }

      for (int k = begin; k < end; ++k) {
        const std::size_t idx = seq[k];
        if (curvature[idx] && !rejected[idx] && planar_allowed[idx] && *curvature[idx] < p.edge_threshold) {
          out.map_planars.push_back(make(k, s));
        }
      }
    }
  }
  return out;
}

double edge_residual(const Vec3& q, const Vec3& a, const Vec3& b) {
  const double len = (a - b).norm();
  if (!(len > 0.0)) {
    throw Error(ErrorCode::degenerate_line, "edge residual: line points coincide");
  }
  return (q - a).cross(q - b).norm() / len;
}

double plane_residual(const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 normal = (a - b).cross(a - c);
  const double len = normal.norm();
  if (!(len > 1e-12 * (a - b).norm() * (a - c).norm()) || !(len > 0.0)) {
    throw Error(ErrorCode::degenerate_plane, "plane residual: points are collinear");
  }
  return std::abs((q - a).dot(normal)) / len;
}

namespace {

Mat36 point_jacobian(const Pose& T, const Vec3& p) {
  Mat36 J;
  J.leftCols<3>() = T.rotation;
  J.rightCols<3>() = -T.rotation * skew(p);
  return J;
}

}  // namespace

Vec6 edge_residual_jacobian(const Pose& T, const Vec3& p, const Vec3& a, const Vec3& b) {
  const double len = (a - b).norm();
  if (!(len > 0.0)) {
    throw Error(ErrorCode::degenerate_line, "edge residual: line points coincide");
  }
  const Vec3 u = (b - a) / len;
  const Vec3 q = T * p;
  const Vec3 perp = (q - a) - u * u.dot(q - a);
  const double d = perp.norm();
  if (d == 0.0) {
    return Vec6::Zero();
  }
  return point_jacobian(T, p).transpose() * (perp / d);
}

Vec6 plane_residual_jacobian(const Pose& T, const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 normal = (a - b).cross(a - c);
  const double len = normal.norm();
  if (!(len > 1e-12 * (a - b).norm() * (a - c).norm()) || !(len > 0.0)) {
    throw Error(ErrorCode::degenerate_plane, "plane residual: points are collinear");
  }
  normal /= len;
  const double signed_d = normal.dot(T * p - a);
  if (signed_d == 0.0) {
    return Vec6::Zero();
  }
  const double sign = signed_d > 0.0 ? 1.0 : -1.0;
  return sign * (point_jacobian(T, p).transpose() * normal);
}

double bisquare_weight(double r, double r0) {
  const double u = r / r0;
  if (std::abs(u) >= 1.0) {
    return 0.0;
  }
  const double t = 1.0 - u * u;
  return t * t;
}

}  // namespace lodom
