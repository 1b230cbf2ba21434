#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include <lodom/geometry.hpp>

namespace lodom {

/// Integer cell coordinates: floor(coord / cell_size) per axis.
struct CellKey {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  friend bool operator==(const CellKey&, const CellKey&) = default;
  friend bool operator<(const CellKey& a, const CellKey& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    return a.z < b.z;
  }
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    // Teschner et al. spatial hash primes.
    return static_cast<std::size_t>(static_cast<std::uint64_t>(k.x) * 73856093u ^
                                    static_cast<std::uint64_t>(k.y) * 19349669u ^
                                    static_cast<std::uint64_t>(k.z) * 83492791u);
  }
};

CellKey cell_key(const Vec3& p, double cell_size);

struct VoxelCell {
  std::vector<std::size_t> indices;  // member points, ascending
  std::size_t n = 0;
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Zero();  // population form, 1/n
};

/// Cubic voxel partition of a point set. Owns a copy of the coordinates.
class VoxelGrid {
public:
  VoxelGrid() = default;
  VoxelGrid(double cell_size, std::vector<Vec3> points);

  double cell_size() const { return cell_size_; }
  std::span<const Vec3> points() const { return points_; }
  std::size_t num_cells() const { return cells_.size(); }

  const std::unordered_map<CellKey, VoxelCell, CellKeyHash>& cells() const { return cells_; }
  std::unordered_map<CellKey, VoxelCell, CellKeyHash>& cells() { return cells_; }

  const VoxelCell* find(const CellKey& key) const;
  const VoxelCell* find(const Vec3& p) const { return find(cell_key(p, cell_size_)); }

  /// Cell keys in ascending lexicographic order.
  std::vector<CellKey> sorted_keys() const;

private:
  double cell_size_ = 1.0;
  std::vector<Vec3> points_;
  std::unordered_map<CellKey, VoxelCell, CellKeyHash> cells_;
};

/// Assigns every point to cell floor(p / cell_size). Throws ErrorCode::invalid_argument when
/// cell_size is not positive.
VoxelGrid voxel_partition(const PointCloud& c, double cell_size);
VoxelGrid voxel_partition(std::vector<Vec3> points, double cell_size);

/// Fills each cell's mean and population covariance (1/n).
VoxelGrid voxel_stats(VoxelGrid g);

}  // namespace lodom
