#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "meshloc/gnn/embedder.hpp"
#include "meshloc/img/cnn.hpp"
#include "meshloc/img/grid.hpp"
#include "meshloc/match/matcher.hpp"
#include "meshloc/num/optimizer.hpp"
#include "meshloc/train/augment.hpp"
#include "meshloc/train/ground_truth.hpp"
#include "meshloc/train/losses.hpp"

namespace meshloc::train {

struct StageConfig {
  int epochs = 1;
  double learning_rate = 1e-3;
  bool image_augment = true;
  bool mesh_augment = false;
};

/// Three-stage schedule: stage 1 trains on every scene with image and mesh
/// augmentation, stage 2 drops the mesh augmentation, stage 3 refines one
/// scene at a time for a few epochs.
struct TrainConfig {
  std::vector<StageConfig> stages = {{4, 1e-3, true, true}, {2, 5e-4, true, false},
                                     {2, 2e-4, true, false}};
  LossWeights weights;
  match::MatchConfig routing{{1, 1, 1, 1, 1, 1}, 0.0};  // greedy route, no filtering while training
  AugmentConfig augment;
  OcclusionConfig occlusion;
  double depth_max_range = 10.0;
  std::uint64_t seed = 0;
};

/// One scene prepared for training: normalization, adjacency and per-frame
/// ground truth are computed once up front.
struct TrainingScene {
  scene::TriangleMesh mesh;        // original coordinates
  scene::TriangleMesh normalized;  // embedder input
  scene::NormalizationParams norm;
  std::vector<std::vector<int>> adjacency;
  gnn::EdgeList edges;
  std::vector<scene::FrameRecord> frames;
  std::vector<GroundTruth> gt;
};

TrainingScene prepare_scene(scene::TriangleMesh mesh, std::vector<scene::FrameRecord> frames,
                            const scene::PinholeCamera& cam, const img::GridHierarchy& grid,
                            const OcclusionConfig& occ);

struct EpochStats {
  double total = 0, confidence = 0, similarity = 0, offset = 0, norm = 0;
  int frames = 0;
  int offset_empty_frames = 0;
  int skipped_steps = 0;  // optimizer steps skipped on non-finite gradients
};

struct TrainLogRow {
  int stage = 0;
  int epoch = 0;
  EpochStats stats;
};

/// One pass over the frames of the selected scenes (all scenes when
/// `scene_subset` is null): per frame augment, embed, route, build the losses,
/// backpropagate and step the optimizer. Frame order is a seeded shuffle;
/// a non-finite loss aborts with the offending frame id in the message.
EpochStats train_epoch(std::vector<TrainingScene>& scenes, num::ParamSet& params, num::Adam& opt,
                       const scene::PinholeCamera& cam, const img::GridHierarchy& grid,
                       const gnn::GnnConfig& gnn_cfg, const img::CnnConfig& cnn_cfg,
                       const TrainConfig& cfg, int stage_index, int epoch_index,
                       const std::vector<int>* scene_subset = nullptr);

/// Full schedule across all stages. The callback (if any) observes every
/// epoch; rows are returned for logging.
std::vector<TrainLogRow> run_training(std::vector<TrainingScene>& scenes, num::ParamSet& params,
                                      const scene::PinholeCamera& cam,
                                      const img::GridHierarchy& grid,
                                      const gnn::GnnConfig& gnn_cfg, const img::CnnConfig& cnn_cfg,
                                      const TrainConfig& cfg,
                                      const std::function<void(const TrainLogRow&)>& on_epoch = {});

}  // namespace meshloc::train
