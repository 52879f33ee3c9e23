#include <cmath>

#include "meshloc/pose/solver.hpp"
#include "meshloc/pose/spatial_hash.hpp"

namespace meshloc::pose {

SpatialHashGrid::SpatialHashGrid(std::span<const Eigen::Vector3d> points, double cell_size)
    : points_(points.begin(), points.end()), cell_size_(cell_size > 0 ? cell_size : 1.0) {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const Eigen::Vector3d& p = points_[i];
    cells_[key_of(static_cast<int>(std::floor(p.x() / cell_size_)),
                  static_cast<int>(std::floor(p.y() / cell_size_)),
                  static_cast<int>(std::floor(p.z() / cell_size_)))]
        .push_back(static_cast<int>(i));
  }
}

int SpatialHashGrid::nearest(const Eigen::Vector3d& query, double max_dist) const {
  const int cx = static_cast<int>(std::floor(query.x() / cell_size_));
  const int cy = static_cast<int>(std::floor(query.y() / cell_size_));
  const int cz = static_cast<int>(std::floor(query.z() / cell_size_));
  int best = -1;
  double best_sq = max_dist * max_dist;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) {
        const auto it = cells_.find(key_of(cx + dx, cy + dy, cz + dz));
        if (it == cells_.end()) continue;
        for (int idx : it->second) {
          const double d = (points_[static_cast<std::size_t>(idx)] - query).squaredNorm();
          if (d <= best_sq) {
            // ties resolve to the lowest index for determinism
            if (d < best_sq || best == -1 || idx < best) {
              best_sq = d;
              best = idx;
            }
          }
        }
      }
  return best;
}

namespace {

/// Mean gate-truncated squared nearest-neighbor distance of the cloud mapped
/// into world space; also reports the matched pairs.
double truncated_objective(const scene::RigidTransform& world_to_cam,
                           std::span<const Eigen::Vector3d> camera_cloud,
                           const SpatialHashGrid& grid,
                           std::span<const Eigen::Vector3d> world_pts, double gate,
                           std::vector<Eigen::Vector3d>* matched_cam = nullptr,
                           std::vector<Eigen::Vector3d>* matched_world = nullptr) {
  const scene::RigidTransform cam_to_world = world_to_cam.inverse();
  double acc = 0.0;
  if (matched_cam) matched_cam->clear();
  if (matched_world) matched_world->clear();
  for (const Eigen::Vector3d& p : camera_cloud) {
    const Eigen::Vector3d w = cam_to_world.apply(p);
    const int idx = grid.nearest(w, gate);
    if (idx < 0) {
      acc += gate * gate;
      continue;
    }
    const Eigen::Vector3d& q = world_pts[static_cast<std::size_t>(idx)];
    acc += std::min((w - q).squaredNorm(), gate * gate);
    if (matched_cam) {
      matched_cam->push_back(p);
      matched_world->push_back(q);
    }
  }
  return camera_cloud.empty() ? 0.0 : acc / static_cast<double>(camera_cloud.size());
}

}  // namespace

IcpResult icp_refine(const scene::RigidTransform& initial,
                     std::span<const Eigen::Vector3d> camera_cloud,
                     std::span<const Eigen::Vector3d> static_world_pts,
                     const SolverConfig& config) {
  IcpResult result;
  result.transform = initial;
  const double gate = config.icp_gate * config.scene_scale;
  if (camera_cloud.empty() || static_world_pts.empty()) return result;

  const SpatialHashGrid grid(static_world_pts, gate);
  std::vector<Eigen::Vector3d> matched_cam, matched_world;
  double objective = truncated_objective(result.transform, camera_cloud, grid, static_world_pts,
                                         gate, &matched_cam, &matched_world);
  result.initial_objective = objective;
  result.final_objective = objective;
  result.objective_trace.push_back(objective);
  if (matched_cam.empty()) return result;  // nothing inside the gate: T0 unchanged
  result.matched = true;

  for (int it = 0; it < config.icp_max_iterations; ++it) {
    const auto aligned = kabsch_align(matched_cam, matched_world);
    if (!aligned) break;
    const double candidate = truncated_objective(*aligned, camera_cloud, grid, static_world_pts,
                                                 gate, &matched_cam, &matched_world);
    if (candidate > objective) break;  // safeguard; truncation makes this a no-op in practice
    result.transform = *aligned;
    result.iterations = it + 1;
    result.objective_trace.push_back(candidate);
    const double improvement = objective > 0 ? (objective - candidate) / objective : 0.0;
    objective = candidate;
    result.final_objective = objective;
    if (improvement < config.icp_rel_tol || matched_cam.empty()) break;
  }
  return result;
}

}  // namespace meshloc::pose
