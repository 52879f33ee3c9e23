#pragma once

#include <optional>

#include "meshloc/gnn/embedder.hpp"
#include "meshloc/img/cnn.hpp"
#include "meshloc/match/matcher.hpp"
#include "meshloc/pose/solver.hpp"
#include "meshloc/train/ground_truth.hpp"

namespace meshloc::synth {

enum class LocalizeMode {
  Learned,          // CNN cell embeddings + cached vertex descriptors
  OracleEmbedding,  // ground-truth-constructed embeddings: geometry in isolation
};

struct LocalizeParams {
  match::MatchConfig routing;  // beams [1,3,3,3,4,4], threshold 0.5 by default
  pose::SolverConfig solver;
  train::OcclusionConfig occlusion;
  match::DepthSampling depth_sampling;
  double icp_fine_gate = 0.02;  // normalized units; second ICP stage, 0 disables
  double depth_max_range = 10.0;
  std::uint64_t oracle_seed = 777;
};

/// Scene-side state shared by every frame of a localization run; read-only
/// once built, so frames may be processed on independent threads.
struct SceneBundle {
  scene::TriangleMesh mesh;  // original coordinates
  scene::NormalizationParams norm;
  scene::PinholeCamera cam;
  std::vector<Eigen::Vector3d> static_world;  // static vertices, for scoring/ICP
  gnn::VertexDescriptorSet descriptors;       // learned mode: cached mesh embeddings

  static SceneBundle build(scene::TriangleMesh mesh, const scene::PinholeCamera& cam,
                           gnn::VertexDescriptorSet descriptors = {});
};

struct LocalizeResult {
  std::optional<scene::RigidTransform> pose;
  pose::FrameMetrics metrics;
  int correspondence_count = 0;
  int survivors = 0;           // vertices that reached the finest level
  int visible_vertices = 0;    // per ground truth
  double routing_hit_rate = 0;  // correctly routed / visible
};

/// Full per-frame pipeline: embed image, route vertices, predict offsets,
/// extract 3D-3D pairs, solve with RANSAC + ICP, measure against the frame's
/// ground-truth pose. A frame that produces no pose is reported as a NaN
/// frame, never as an exception. In oracle-embedding mode the learned
/// embeddings, confidence heads and offsets are replaced by ground-truth
/// constructions so the geometric path is tested in isolation.
LocalizeResult run_localize(const SceneBundle& bundle, const scene::FrameRecord& frame,
                            num::ParamSet& params, const img::GridHierarchy& grid,
                            const img::CnnConfig& cnn_cfg, const LocalizeParams& lp,
                            LocalizeMode mode);

}  // namespace meshloc::synth
