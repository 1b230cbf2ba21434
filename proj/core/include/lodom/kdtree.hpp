#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <lodom/geometry.hpp>

namespace lodom {

struct Neighbor {
  std::size_t index = 0;
  double sq_distance = 0.0;

  double distance() const;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact 3-D k-d tree. Results are ordered by ascending distance, ties by ascending point index,
/// so every query returns precisely the brute-force answer.
///
/// The tree owns a copy of the coordinates; it is immutable after construction and safe to
/// query from several threads.
class KdTree {
public:
  /// Throws ErrorCode::empty_input for an empty point set.
  explicit KdTree(std::vector<Vec3> points, std::size_t leaf_size = 8);
  explicit KdTree(const PointCloud& cloud, std::size_t leaf_size = 8);

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }
  std::span<const Vec3> points() const { return points_; }

  /// The k nearest points, or the whole set when it has fewer than k points.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;
  /// knn restricted to points with squared distance <= max_sq_distance.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k, double max_sq_distance) const;
  /// Nearest point within max_sq_distance (inclusive), if any.
  std::optional<Neighbor> nearest(const Vec3& query, double max_sq_distance) const;
  /// All points with distance strictly below `radius`.
  std::vector<Neighbor> radius(const Vec3& query, double radius) const;

private:
  struct Node {
    // Leaf when axis < 0: covers order_[begin, end).
    int axis = -1;
    double split = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  template <typename Visitor>
  void search(std::uint32_t node, const Vec3& q, Visitor& visitor) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

}  // namespace lodom
