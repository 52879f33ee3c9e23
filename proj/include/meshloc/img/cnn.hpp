#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "meshloc/common/rng.hpp"
#include "meshloc/img/grid.hpp"
#include "meshloc/num/ops.hpp"
#include "meshloc/scene/frame.hpp"

namespace meshloc::img {

/// Darknet-style backbone with one prediction head per grid level. The stem
/// keeps resolution; every DarknetSet halves it and doubles the channels, so
/// a hierarchy of L levels needs L-1 sets. Head l reads the map whose
/// resolution matches grid level l (the deepest map serves level 0), pools it
/// to the exact level dimensions and projects channels to the level width.
struct CnnConfig {
  int in_channels = 4;
  int initial_filters = 32;
  std::vector<int> set_reps = {1, 1, 2, 2, 2, 2};  // DarknetBlocks per set
  std::vector<int> head_widths = {256, 128, 128, 64, 64, 64, 64};
  double leaky_slope = 0.1;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  int levels() const { return static_cast<int>(set_reps.size()) + 1; }
  void validate() const;  // throws ConfigError
};

/// Per-level cell embeddings; level l is cell_count(l) x head_widths[l].
struct CellEmbeddingSet {
  std::vector<Eigen::MatrixXd> levels;

  int level_count() const { return static_cast<int>(levels.size()); }
  const Eigen::MatrixXd& level(int l) const { return levels.at(static_cast<std::size_t>(l)); }
};

void init_cnn_params(const CnnConfig& config, num::ParamSet& params, Rng& rng,
                     const std::string& prefix = "cnn.");

/// Full forward pass on the tape; returns one cells-by-width Var per level.
/// `use_batch_stats` picks training-style normalization, `update_running`
/// additionally folds batch statistics into the running buffers stored in
/// `params` (kept separate so finite-difference probes stay side-effect free).
std::vector<num::Var> embed_image_t(num::Tape& tape, num::ParamSet& params,
                                    const num::Tensor& rgbd, const GridHierarchy& grid,
                                    const CnnConfig& config, bool use_batch_stats,
                                    bool update_running, const std::string& prefix = "cnn.");

/// Inference wrapper with running-statistics normalization.
CellEmbeddingSet embed_image(const num::Tensor& rgbd, const GridHierarchy& grid,
                             const CnnConfig& config, num::ParamSet& params);

/// [4,H,W] network input: RGB channels as stored, depth divided by max_range.
num::Tensor frame_to_tensor(const scene::FrameRecord& frame, double depth_max_range);

}  // namespace meshloc::img
