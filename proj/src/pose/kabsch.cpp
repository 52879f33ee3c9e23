#include <Eigen/SVD>

#include "meshloc/pose/solver.hpp"

namespace meshloc::pose {

std::optional<scene::RigidTransform> kabsch_align(std::span<const Eigen::Vector3d> camera_pts,
                                                  std::span<const Eigen::Vector3d> world_pts) {
  if (camera_pts.size() != world_pts.size() || camera_pts.size() < 3) return std::nullopt;
  const auto n = camera_pts.size();

  Eigen::Vector3d cam_centroid = Eigen::Vector3d::Zero();
  Eigen::Vector3d world_centroid = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cam_centroid += camera_pts[i];
    world_centroid += world_pts[i];
  }
  cam_centroid /= static_cast<double>(n);
  world_centroid /= static_cast<double>(n);

  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d w = world_pts[i] - world_centroid;
    const Eigen::Vector3d c = camera_pts[i] - cam_centroid;
    covariance += w * c.transpose();
    spread += w.squaredNorm();
  }
  if (spread <= 1e-24) return std::nullopt;  // all world points coincide

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  // rank < 2 leaves a rotation axis unconstrained (collinear samples)
  if (sv[1] <= 1e-12 * std::max(sv[0], 1e-300)) return std::nullopt;

  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  scene::RigidTransform t;
  t.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  t.translation = cam_centroid - t.rotation * world_centroid;
  return t;
}

bool far_enough(const std::array<Eigen::Vector3d, 3>& camera_pts, double min_dist) {
  return (camera_pts[0] - camera_pts[1]).norm() >= min_dist &&
         (camera_pts[0] - camera_pts[2]).norm() >= min_dist &&
         (camera_pts[1] - camera_pts[2]).norm() >= min_dist;
}

bool rigid_check(const std::array<Eigen::Vector3d, 3>& camera_pts,
                 const std::array<Eigen::Vector3d, 3>& world_pts, double tol) {
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      const double dc = (camera_pts[i] - camera_pts[j]).norm();
      const double dw = (world_pts[i] - world_pts[j]).norm();
      if (std::abs(dc - dw) > tol) return false;
    }
  return true;
}

}  // namespace meshloc::pose
