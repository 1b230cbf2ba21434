#include <lodom/kdtree.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <lodom/error.hpp>

namespace lodom {

double Neighbor::distance() const {
  return std::sqrt(sq_distance);
}

namespace {

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.sq_distance < b.sq_distance || (a.sq_distance == b.sq_distance && a.index < b.index);
}

// Bounded max-heap on (sq_distance, index).
class KnnCollector {
public:
  KnnCollector(std::size_t k, double max_sq) : k_(k), max_sq_(max_sq) { heap_.reserve(k); }

  double bound() const { return heap_.size() < k_ ? max_sq_ : heap_.front().sq_distance; }

  void offer(std::size_t index, double sq) {
    if (sq > max_sq_) {
      return;
    }
    const Neighbor n{index, sq};
    if (heap_.size() < k_) {
      heap_.push_back(n);
      std::push_heap(heap_.begin(), heap_.end(), closer);
    } else if (closer(n, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), closer);
      heap_.back() = n;
      std::push_heap(heap_.begin(), heap_.end(), closer);
    }
  }

  // Far subtrees are visited on equality so that equal-distance points with lower index win.
  bool visit(double plane_sq) const { return plane_sq <= bound(); }

  std::vector<Neighbor> take() {
    std::sort_heap(heap_.begin(), heap_.end(), closer);
    return std::move(heap_);
  }

private:
  std::size_t k_;
  double max_sq_;
  std::vector<Neighbor> heap_;
};

class RadiusCollector {
public:
  explicit RadiusCollector(double sq_radius) : sq_radius_(sq_radius) {}

  void offer(std::size_t index, double sq) {
    if (sq < sq_radius_) {
      found_.push_back({index, sq});
    }
  }

  bool visit(double plane_sq) const { return plane_sq < sq_radius_; }

  std::vector<Neighbor> take() {
    std::sort(found_.begin(), found_.end(), closer);
    return std::move(found_);
  }

private:
  double sq_radius_;
  std::vector<Neighbor> found_;
};

}  // namespace

KdTree::KdTree(std::vector<Vec3> points, std::size_t leaf_size)
: points_(std::move(points)), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  if (points_.empty()) {
    throw Error(ErrorCode::empty_input, "k-d tree over an empty point set");
  }
  if (points_.size() >= std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::invalid_argument, "k-d tree point count exceeds 32-bit indexing");
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
  build(0, static_cast<std::uint32_t>(points_.size()));
}

KdTree::KdTree(const PointCloud& cloud, std::size_t leaf_size) : KdTree(cloud.positions(), leaf_size) {}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{});
  nodes_[id].begin = begin;
  nodes_[id].end = end;

  if (end - begin <= leaf_size_) {
    return id;
  }

  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (auto i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) {
    return id;  // all coincident
  }

  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = points_[a][axis];
                     const double cb = points_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const double split = points_[order_[mid]][axis];

  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

template <typename Visitor>
void KdTree::search(std::uint32_t node_id, const Vec3& q, Visitor& visitor) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (auto i = node.begin; i < node.end; ++i) {
      const auto idx = order_[i];
      visitor.offer(idx, (points_[idx] - q).squaredNorm());
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const auto near = diff < 0.0 ? node.left : node.right;
  const auto far = diff < 0.0 ? node.right : node.left;
  search(near, q, visitor);
  if (visitor.visit(diff * diff)) {
    search(far, q, visitor);
  }
}

std::vector<Neighbor> KdTree::knn(const Vec3& query, std::size_t k) const {
  return knn(query, k, std::numeric_limits<double>::infinity());
}

std::vector<Neighbor> KdTree::knn(const Vec3& query, std::size_t k, double max_sq_distance) const {
  if (k == 0) {
    return {};
  }
  KnnCollector collector(std::min(k, points_.size()), max_sq_distance);
  search(0, query, collector);
  return collector.take();
}

std::optional<Neighbor> KdTree::nearest(const Vec3& query, double max_sq_distance) const {
  auto found = knn(query, 1, max_sq_distance);
  if (found.empty()) {
    return std::nullopt;
  }
  return found.front();
}

std::vector<Neighbor> KdTree::radius(const Vec3& query, double radius) const {
  if (!(radius > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "radius search needs a positive radius");
  }
  RadiusCollector collector(radius * radius);
  search(0, query, collector);
  return collector.take();
}

}  // namespace lodom
