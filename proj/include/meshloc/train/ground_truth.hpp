#pragma once

#include <Eigen/Dense>

#include <vector>

#include "meshloc/img/grid.hpp"
#include "meshloc/scene/camera.hpp"
#include "meshloc/scene/frame.hpp"

namespace meshloc::train {

/// Visibility tolerance: a projected vertex counts as visible when the depth
/// map at its pixel agrees within max(relative * depth, absolute * scale).
struct OcclusionConfig {
  double relative = 0.02;
  double absolute = 0.01;  // in normalized units; multiplied by scene scale
};

struct VertexGroundTruth {
  bool visible = false;
  std::vector<int> cells;               // cell per level, parent-consistent
  Eigen::Vector2d offset = {0.0, 0.0};  // fractional position in the finest cell
  Eigen::Vector2d pixel = {0.0, 0.0};   // continuous projection
  double depth = 0.0;                   // camera-space depth of the projection
};

struct GroundTruth {
  std::vector<VertexGroundTruth> vertices;
  int level_count = 0;

  int visible_count() const {
    int n = 0;
    for (const auto& v : vertices) n += v.visible ? 1 : 0;
    return n;
  }
};

/// Projects every vertex with the known pose, tests against the frame's depth
/// map for occlusion, and records the cell path and sub-cell offset.
GroundTruth generate_ground_truth(const Eigen::MatrixX3d& world_positions,
                                  const scene::RigidTransform& pose_gt,
                                  const scene::PinholeCamera& cam, const scene::Image& depth,
                                  const img::GridHierarchy& grid, const OcclusionConfig& occ,
                                  double scene_scale);

}  // namespace meshloc::train
