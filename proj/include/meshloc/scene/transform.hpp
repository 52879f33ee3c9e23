#pragma once

#include <Eigen/Dense>

namespace meshloc::scene {

/// Rigid motion. When used as a camera pose the convention is world-to-camera
/// throughout: apply() maps world points into the camera frame.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }

  /// apply(compose(a,b), p) == apply(a, apply(b, p)).
  static RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
  }

  /// Optical center in world coordinates (for a world-to-camera pose).
  Eigen::Vector3d camera_center() const { return -(rotation.transpose() * translation); }

  bool is_rigid(double tol = 1e-9) const {
    const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
    return (rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  static RigidTransform from_matrix(const Eigen::Matrix4d& m) {
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  }
};

/// Row-wise transform of an N-by-3 point matrix.
inline Eigen::MatrixX3d transform_points(const RigidTransform& t, const Eigen::MatrixX3d& pts) {
  return (pts * t.rotation.transpose()).rowwise() + t.translation.transpose();
}

/// Rotation from intrinsic Euler angles (radians): R = Rz * Ry * Rx.
inline Eigen::Matrix3d rotation_zyx(double rx, double ry, double rz) {
  return (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

}  // namespace meshloc::scene
