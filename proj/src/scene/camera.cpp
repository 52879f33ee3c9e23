#include "meshloc/scene/camera.hpp"

#include <stdexcept>

namespace meshloc::scene {

std::optional<PixelDepth> project_point(const PinholeCamera& cam,
                                        const RigidTransform& world_to_cam,
                                        const Eigen::Vector3d& world) {
  const Eigen::Vector3d c = world_to_cam.apply(world);
  if (c.z() <= 0.0) return std::nullopt;
  const double u = cam.fx * c.x() / c.z() + cam.cx;
  const double v = cam.fy * c.y() / c.z() + cam.cy;
  if (u < 0.0 || u >= cam.width || v < 0.0 || v >= cam.height) return std::nullopt;
  return PixelDepth{u, v, c.z()};
}

Eigen::Vector3d backproject_pixel(const PinholeCamera& cam, double u, double v, double depth) {
  if (depth <= 0.0)
    throw std::invalid_argument("backproject_pixel: depth must be positive, got " +
                                std::to_string(depth));
  return {(u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth};
}

}  // namespace meshloc::scene
