#pragma once

#include <optional>
#include <string>
#include <vector>

#include "meshloc/scene/transform.hpp"

namespace meshloc::io {

/// Ground-truth pose file: one 4x4 row-major world-to-camera matrix per
/// frame, four values per line, frames separated implicitly (16 values each).
void write_pose_blocks(const std::string& path, const std::vector<scene::RigidTransform>& poses);
std::vector<scene::RigidTransform> read_pose_blocks(const std::string& path);

/// Estimate file: per line "frame_id v00 v01 ... v33" (row-major
/// world-to-camera) or "frame_id nan" for frames without a prediction.
struct PoseEstimate {
  int frame_id = 0;
  std::optional<scene::RigidTransform> pose;
};

void write_pose_estimates(const std::string& path, const std::vector<PoseEstimate>& estimates);
std::vector<PoseEstimate> read_pose_estimates(const std::string& path);

}  // namespace meshloc::io
