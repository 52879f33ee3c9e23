#include <algorithm>
#include <cmath>

#include "meshloc/pose/solver.hpp"

namespace meshloc::pose {

std::pair<double, double> pose_error(const scene::RigidTransform& estimate,
                                     const scene::RigidTransform& ground_truth) {
  const double translation = (estimate.camera_center() - ground_truth.camera_center()).norm();
  const double cos_angle =
      std::clamp(((ground_truth.rotation.transpose() * estimate.rotation).trace() - 1.0) / 2.0,
                 -1.0, 1.0);
  const double rotation_deg = std::acos(cos_angle) * 180.0 / M_PI;
  return {translation, rotation_deg};
}

std::optional<double> dcre_of_frame(const scene::Image& depth, const scene::PinholeCamera& cam,
                                    const scene::RigidTransform& estimate,
                                    const scene::RigidTransform& ground_truth) {
  if (depth.channels != 1 || depth.width <= 0 || depth.height <= 0) return std::nullopt;
  const double diagonal = std::hypot(static_cast<double>(depth.width),
                                     static_cast<double>(depth.height));
  const scene::RigidTransform gt_inverse = ground_truth.inverse();
  double acc = 0.0;
  long count = 0;
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      const double d = depth.at(0, y, x);
      if (d <= 0.0) continue;
      const double u = x + 0.5, v = y + 0.5;  // pixel center
      const Eigen::Vector3d world = gt_inverse.apply(scene::backproject_pixel(cam, u, v, d));
      const Eigen::Vector3d reprojected = estimate.apply(world);
      double displacement = diagonal;  // behind the estimated camera: capped
      if (reprojected.z() > 0.0) {
        const double ru = cam.fx * reprojected.x() / reprojected.z() + cam.cx;
        const double rv = cam.fy * reprojected.y() / reprojected.z() + cam.cy;
        displacement = std::min(std::hypot(ru - u, rv - v), diagonal);
      }
      acc += displacement;
      ++count;
    }
  if (count == 0) return std::nullopt;
  return acc / static_cast<double>(count) / diagonal;
}

BenchmarkRecord aggregate_metrics(std::span<const FrameMetrics> frames,
                                  double pose_translation_bound) {
  BenchmarkRecord record;
  record.pose_translation_bound = pose_translation_bound;
  record.frame_count = static_cast<int>(frames.size());
  if (frames.empty()) return record;  // all-zero record for an empty run
  const double n = static_cast<double>(frames.size());
  long nan = 0, pose_ok = 0, dcre005 = 0, dcre015 = 0, outlier = 0;
  for (const auto& f : frames) {
    if (!f.has_pose) {
      ++nan;
      continue;
    }
    if (f.translation_error <= pose_translation_bound && f.rotation_error_deg <= 5.0) ++pose_ok;
    if (f.dcre_valid) {
      if (f.dcre <= 0.05) ++dcre005;
      if (f.dcre <= 0.15) ++dcre015;
      if (f.dcre > 0.5) ++outlier;
    }
  }
  record.nan_rate = nan / n;
  record.pose_005_5deg = pose_ok / n;
  record.dcre_005 = dcre005 / n;
  record.dcre_015 = dcre015 / n;
  record.outlier_05 = outlier / n;
  record.score = 1.0 + record.dcre_005 - record.outlier_05;
  return record;
}

}  // namespace meshloc::pose
