#pragma once

#include <string>

#include "meshloc/gnn/embedder.hpp"
#include "meshloc/img/cnn.hpp"
#include "meshloc/img/grid.hpp"
#include "meshloc/match/matcher.hpp"
#include "meshloc/pose/solver.hpp"
#include "meshloc/train/trainer.hpp"

namespace meshloc::io {

/// Everything configurable in one declarative file. Defaults are the paper
/// values where the paper fixes them; absent keys keep the defaults, unknown
/// keys are rejected.
struct PipelineConfig {
  int grid_width = 512;
  int grid_height = 288;
  int grid_levels = 7;
  gnn::GnnConfig gnn;
  img::CnnConfig cnn;
  match::MatchConfig routing;  // inference-time routing
  match::DepthSampling depth_sampling;
  double icp_fine_gate = 0.02;
  pose::SolverConfig solver;
  train::TrainConfig train;

  img::GridHierarchy grid() const {
    return img::GridHierarchy::build(grid_width, grid_height, grid_levels);
  }
  void validate() const;  // throws ConfigError on cross-module inconsistencies
};

PipelineConfig load_pipeline_config(const std::string& path);
void write_pipeline_config(const std::string& path, const PipelineConfig& config);

}  // namespace meshloc::io
