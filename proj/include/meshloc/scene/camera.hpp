#pragma once

#include <optional>

#include "meshloc/scene/transform.hpp"

namespace meshloc::scene {

struct PinholeCamera {
  double fx = 0, fy = 0;  // focal lengths, pixels
  double cx = 0, cy = 0;  // principal point, pixels
  int width = 0, height = 0;

  bool valid() const {
    return fx > 0 && fy > 0 && cx >= 0 && cx < width && cy >= 0 && cy < height;
  }
};

/// Continuous pixel position plus camera-space depth.
struct PixelDepth {
  double u = 0, v = 0, depth = 0;
};

/// Projects a world point through a world-to-camera pose. Absent when the
/// point lies at or behind the camera plane or lands outside the image.
std::optional<PixelDepth> project_point(const PinholeCamera& cam, const RigidTransform& world_to_cam,
                                        const Eigen::Vector3d& world);

/// Camera-space point for a pixel at the given depth. Throws on depth <= 0
/// (an invalid depth-map sample).
Eigen::Vector3d backproject_pixel(const PinholeCamera& cam, double u, double v, double depth);

}  // namespace meshloc::scene
