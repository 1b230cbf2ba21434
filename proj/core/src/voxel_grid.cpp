#include <lodom/voxel_grid.hpp>

#include <algorithm>
#include <cmath>

#include <lodom/error.hpp>

namespace lodom {

CellKey cell_key(const Vec3& p, double cell_size) {
  return CellKey{static_cast<std::int64_t>(std::floor(p.x() / cell_size)),
                 static_cast<std::int64_t>(std::floor(p.y() / cell_size)),
                 static_cast<std::int64_t>(std::floor(p.z() / cell_size))};
}

VoxelGrid::VoxelGrid(double cell_size, std::vector<Vec3> points) : cell_size_(cell_size), points_(std::move(points)) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw Error(ErrorCode::invalid_argument, "voxel cell size must be positive");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    auto& cell = cells_[cell_key(points_[i], cell_size_)];
    cell.indices.push_back(i);
    cell.n = cell.indices.size();
  }
}

const VoxelCell* VoxelGrid::find(const CellKey& key) const {
  const auto it = cells_.find(key);
  return it == cells_.end() ? nullptr : &it->second;
}

std::vector<CellKey> VoxelGrid::sorted_keys() const {
  std::vector<CellKey> keys;
  keys.reserve(cells_.size());
  for (const auto& [key, cell] : cells_) {
    keys.push_back(key);
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

VoxelGrid voxel_partition(std::vector<Vec3> points, double cell_size) {
  return VoxelGrid(cell_size, std::move(points));
}

VoxelGrid voxel_partition(const PointCloud& c, double cell_size) {
  return VoxelGrid(cell_size, c.positions());
}

VoxelGrid voxel_stats(VoxelGrid g) {
  const auto pts = g.points();
  for (auto& [key, cell] : g.cells()) {
    cell.n = cell.indices.size();
    if (cell.n == 0) {
      continue;
    }
    // Single pass on coordinates shifted by the first member.
    const Vec3 origin = pts[cell.indices.front()];
    Vec3 sum = Vec3::Zero();
    Mat3 sum_sq = Mat3::Zero();
    for (const auto i : cell.indices) {
      const Vec3 d = pts[i] - origin;
      sum += d;
      sum_sq += d * d.transpose();
    }
    const double n = static_cast<double>(cell.n);
    const Vec3 shifted_mean = sum / n;
    cell.mean = origin + shifted_mean;
    Mat3 cov = sum_sq / n - shifted_mean * shifted_mean.transpose();
    cell.cov = 0.5 * (cov + cov.transpose());
  }
  return g;
}

}  // namespace lodom
