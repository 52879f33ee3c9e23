#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "meshloc/match/matcher.hpp"
#include "meshloc/scene/camera.hpp"
#include "meshloc/scene/frame.hpp"
#include "meshloc/scene/transform.hpp"

namespace meshloc::pose {

/// Solver thresholds. far_min, rigid_tol and icp_gate are normalized-unit
/// values and are multiplied by scene_scale before use, so configurations
/// carry over between scenes of different physical size.
struct SolverConfig {
  int iterations = 1024;
  double far_min = 0.1;      // minimum pairwise camera-space sample distance
  double rigid_tol = 0.05;   // allowed world/camera pairwise distance mismatch
  double score_eps = 1e-12;  // score = 1 / (MSE + score_eps)
  double scene_scale = 1.0;
  int icp_max_iterations = 30;
  double icp_rel_tol = 1e-6;  // stop when the objective improves less than this fraction
  double icp_gate = 0.5;      // nearest-neighbor acceptance distance
  std::uint64_t seed = 0;
};

/// Least-squares world-to-camera alignment of matched point sets (SVD of the
/// 3x3 covariance, reflection corrected so det(R) = +1). Absent for
/// degenerate (collinear or coincident) configurations; the caller resamples.
std::optional<scene::RigidTransform> kabsch_align(std::span<const Eigen::Vector3d> camera_pts,
                                                  std::span<const Eigen::Vector3d> world_pts);

/// All three camera-space pairwise distances at least min_dist (ties pass).
bool far_enough(const std::array<Eigen::Vector3d, 3>& camera_pts, double min_dist);

/// World and camera pairwise distances agree within tol on all three pairs
/// (ties pass).
bool rigid_check(const std::array<Eigen::Vector3d, 3>& camera_pts,
                 const std::array<Eigen::Vector3d, 3>& world_pts, double tol);

/// Inverse mean squared error of static pairs mapped into world space by the
/// hypothesis; zero when no static pair exists.
double score_hypothesis(const scene::RigidTransform& world_to_cam,
                        const match::CorrespondenceSet& pairs, double score_eps);

/// The custom RANSAC loop: exactly `iterations` seeded 3-point draws, each
/// admitted through far_enough and rigid_check, hypothesized with Kabsch,
/// scored on static pairs, best hypothesis refined with ICP against the
/// static mesh vertices. Absent when nothing was admitted (a NaN frame).
std::optional<scene::RigidTransform> ransac_pose(const match::CorrespondenceSet& pairs,
                                                 std::span<const Eigen::Vector3d> static_world_pts,
                                                 const SolverConfig& config);

struct IcpResult {
  scene::RigidTransform transform;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  bool matched = false;  // false: no point ever fell inside the gate, T0 returned
  std::vector<double> objective_trace;
};

/// Point-to-point ICP of the camera-space cloud onto the static mesh
/// vertices. The objective is the mean gate-truncated squared nearest
/// distance, which is non-increasing across iterations by construction.
IcpResult icp_refine(const scene::RigidTransform& initial,
                     std::span<const Eigen::Vector3d> camera_cloud,
                     std::span<const Eigen::Vector3d> static_world_pts,
                     const SolverConfig& config);

/// (translation error, rotation error in degrees): camera-center distance and
/// the trace-formula angle between the rotations.
std::pair<double, double> pose_error(const scene::RigidTransform& estimate,
                                     const scene::RigidTransform& ground_truth);

/// Dense correspondence reprojection error: every valid-depth pixel is
/// back-projected with the ground truth and re-projected with the estimate;
/// the mean pixel displacement (capped at one diagonal) is divided by the
/// image diagonal. Absent when the frame has no valid depth.
std::optional<double> dcre_of_frame(const scene::Image& depth, const scene::PinholeCamera& cam,
                                    const scene::RigidTransform& estimate,
                                    const scene::RigidTransform& ground_truth);

struct FrameMetrics {
  bool has_pose = false;
  double translation_error = 0.0;
  double rotation_error_deg = 0.0;
  bool dcre_valid = false;
  double dcre = 0.0;
};

struct BenchmarkRecord {
  double score = 0.0;
  double dcre_005 = 0.0;
  double dcre_015 = 0.0;
  double pose_005_5deg = 0.0;
  double outlier_05 = 0.0;
  double nan_rate = 0.0;
  int frame_count = 0;
  double pose_translation_bound = 0.05;  // scene units; scaled by the caller
};

/// Table-style aggregation; pose bound thresholds are 0.05 * scale scene
/// units and 5 degrees. Empty input yields an all-zero record.
BenchmarkRecord aggregate_metrics(std::span<const FrameMetrics> frames,
                                  double pose_translation_bound = 0.05);

}  // namespace meshloc::pose
