#include "meshloc/train/trainer.hpp"

#include <algorithm>

#include "meshloc/common/errors.hpp"

namespace meshloc::train {

using num::ParamSet;
using num::Tape;
using num::Tensor;
using num::Var;

TrainingScene prepare_scene(scene::TriangleMesh mesh, std::vector<scene::FrameRecord> frames,
                            const scene::PinholeCamera& cam, const img::GridHierarchy& grid,
                            const OcclusionConfig& occ) {
  TrainingScene ts;
  ts.mesh = std::move(mesh);
  auto [normalized, norm] = scene::normalize_mesh(ts.mesh);
  ts.normalized = std::move(normalized);
  ts.norm = norm;
  ts.adjacency = scene::build_adjacency(ts.mesh);
  ts.edges = gnn::build_edge_list(ts.adjacency);
  ts.frames = std::move(frames);
  ts.gt.reserve(ts.frames.size());
  for (const auto& frame : ts.frames)
    ts.gt.push_back(generate_ground_truth(ts.mesh.positions, frame.pose, cam, frame.depth, grid,
                                          occ, ts.norm.scale));
  return ts;
}

namespace {

std::vector<Var> slice_levels(Tape& tape, Var descriptors, const std::vector<int>& split) {
  std::vector<Var> out;
  out.reserve(split.size());
  int offset = 0;
  for (int w : split) {
    out.push_back(num::slice_cols(descriptors, offset, w));
    offset += w;
  }
  return out;
}

gnn::VertexDescriptorSet descriptor_values(Tape& tape, Var descriptors,
                                           const std::vector<int>& split) {
  gnn::VertexDescriptorSet set;
  set.descriptors = tape.value(descriptors).matrix();
  set.split = split;
  set.offsets.resize(split.size());
  int off = 0;
  for (std::size_t l = 0; l < split.size(); ++l) {
    set.offsets[l] = off;
    off += split[l];
  }
  return set;
}

img::CellEmbeddingSet cell_values(Tape& tape, const std::vector<Var>& f_levels) {
  img::CellEmbeddingSet set;
  set.levels.reserve(f_levels.size());
  for (const Var& f : f_levels) set.levels.push_back(tape.value(f).matrix());
  return set;
}

}  // namespace

EpochStats train_epoch(std::vector<TrainingScene>& scenes, ParamSet& params, num::Adam& opt,
                       const scene::PinholeCamera& cam, const img::GridHierarchy& grid,
                       const gnn::GnnConfig& gnn_cfg, const img::CnnConfig& cnn_cfg,
                       const TrainConfig& cfg, int stage_index, int epoch_index,
                       const std::vector<int>* scene_subset) {
  (void)cam;
  if (stage_index < 0 || stage_index >= static_cast<int>(cfg.stages.size()))
    throw ConfigError("train_epoch: stage index out of range");
  const StageConfig& stage = cfg.stages[static_cast<std::size_t>(stage_index)];
  opt.config().learning_rate = stage.learning_rate;

  std::vector<std::pair<int, int>> order;  // (scene, frame)
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    if (scene_subset &&
        std::find(scene_subset->begin(), scene_subset->end(), static_cast<int>(s)) ==
            scene_subset->end())
      continue;
    for (std::size_t f = 0; f < scenes[s].frames.size(); ++f)
      order.emplace_back(static_cast<int>(s), static_cast<int>(f));
  }
  Rng shuffle_rng(cfg.seed ^ (static_cast<std::uint64_t>(stage_index) * 1000003ull +
                              static_cast<std::uint64_t>(epoch_index) * 7919ull + 17ull));
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[shuffle_rng.index(i)]);

  EpochStats stats;
  for (const auto& [si, fi] : order) {
    TrainingScene& ts = scenes[static_cast<std::size_t>(si)];
    const scene::FrameRecord& frame = ts.frames[static_cast<std::size_t>(fi)];

    AugmentConfig aug = cfg.augment;
    if (!stage.image_augment) {
      aug.blur_sigma_max = 0.0;
      aug.noise_sigma_max = 0.0;
      aug.contrast_delta = 0.0;
      aug.brightness_delta = 0.0;
    }
    const int aug_stage = stage.mesh_augment ? 1 : 2;
    const std::uint64_t frame_seed = shuffle_rng.fork(static_cast<std::uint64_t>(
        (si + 1) * 2654435761ull + (fi + 1) * 40503ull + epoch_index)).raw();
    AugmentedSample sample = augment_sample(frame, ts.normalized, aug_stage, aug, frame_seed);

    try {
      Tape tape;
      Var desc = gnn::embed_vertices_t(tape, params,
                                       gnn::build_vertex_features(sample.mesh, gnn_cfg.mask),
                                       ts.edges, gnn_cfg);
      std::vector<Var> e_levels = slice_levels(tape, desc, gnn_cfg.split);

      scene::FrameRecord augmented = frame;
      augmented.rgb = sample.rgb;
      const Tensor rgbd = img::frame_to_tensor(augmented, cfg.depth_max_range);
      std::vector<Var> f_levels = embed_image_t(tape, params, rgbd, grid, cnn_cfg,
                                                /*use_batch_stats=*/true, /*update_running=*/true);

      const gnn::VertexDescriptorSet desc_values_set = descriptor_values(tape, desc, gnn_cfg.split);
      const img::CellEmbeddingSet cell_values_set = cell_values(tape, f_levels);
      const match::RouteState routes =
          match::route_vertices(desc_values_set, cell_values_set, grid, params, cfg.routing);

      LossParts parts = build_losses(tape, params, e_levels, f_levels,
                                     ts.gt[static_cast<std::size_t>(fi)], routes, grid, cfg.weights);
      if (!std::isfinite(parts.total_value()))
        throw NumericalError("non-finite loss");
      tape.backward(parts.total);
      const auto report = opt.step(params, tape.param_grads());
      if (!report.applied) ++stats.skipped_steps;

      stats.total += parts.total_value();
      stats.confidence += parts.confidence.value()[0];
      stats.similarity += parts.similarity.value()[0];
      stats.offset += parts.offset.value()[0];
      stats.norm += parts.norm.value()[0];
      stats.offset_empty_frames += parts.offset_empty ? 1 : 0;
      ++stats.frames;
    } catch (const NumericalError& e) {
      throw NumericalError("train_epoch: scene " + std::to_string(si) + " frame " +
                           std::to_string(frame.frame_id) + ": " + e.what());
    }
  }
  if (stats.frames > 0) {
    stats.total /= stats.frames;
    stats.confidence /= stats.frames;
    stats.similarity /= stats.frames;
    stats.offset /= stats.frames;
    stats.norm /= stats.frames;
  }
  return stats;
}

std::vector<TrainLogRow> run_training(std::vector<TrainingScene>& scenes, ParamSet& params,
                                      const scene::PinholeCamera& cam,
                                      const img::GridHierarchy& grid,
                                      const gnn::GnnConfig& gnn_cfg, const img::CnnConfig& cnn_cfg,
                                      const TrainConfig& cfg,
                                      const std::function<void(const TrainLogRow&)>& on_epoch) {
  std::vector<TrainLogRow> rows;
  num::Adam opt;
  for (int stage = 0; stage < static_cast<int>(cfg.stages.size()); ++stage) {
    const StageConfig& sc = cfg.stages[static_cast<std::size_t>(stage)];
    const bool per_scene = stage == 2;  // refinement runs one scene at a time
    std::vector<std::vector<int>> groups;
    if (per_scene) {
      for (int s = 0; s < static_cast<int>(scenes.size()); ++s) groups.push_back({s});
    } else {
      groups.push_back({});
    }
    for (const auto& group : groups) {
      for (int epoch = 0; epoch < sc.epochs; ++epoch) {
        TrainLogRow row;
        row.stage = stage + 1;
        row.epoch = epoch + 1;
        row.stats = train_epoch(scenes, params, opt, cam, grid, gnn_cfg, cnn_cfg, cfg, stage,
                                epoch, group.empty() ? nullptr : &group);
        rows.push_back(row);
        if (on_epoch) on_epoch(row);
      }
    }
  }
  return rows;
}

}  // namespace meshloc::train
