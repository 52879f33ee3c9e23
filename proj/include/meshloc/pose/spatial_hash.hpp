#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace meshloc::pose {

/// Uniform spatial hash over a fixed point set, sized to the query radius:
/// a nearest-neighbor query only visits the 27 surrounding cells.
class SpatialHashGrid {
 public:
  SpatialHashGrid(std::span<const Eigen::Vector3d> points, double cell_size);

  /// Index of the nearest stored point within max_dist, or -1.
  int nearest(const Eigen::Vector3d& query, double max_dist) const;

 private:
  using Key = std::uint64_t;
  Key key_of(int ix, int iy, int iz) const {
    // 21 bits per axis, offset to keep coordinates positive
    const auto u = [](int v) { return static_cast<std::uint64_t>(v + (1 << 20)) & 0x1fffff; };
    return (u(ix) << 42) | (u(iy) << 21) | u(iz);
  }

  std::vector<Eigen::Vector3d> points_;
  double cell_size_;
  std::unordered_map<Key, std::vector<int>> cells_;
};

}  // namespace meshloc::pose
