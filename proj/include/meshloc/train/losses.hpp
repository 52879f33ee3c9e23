#pragma once

#include <string>
#include <vector>

#include "meshloc/img/grid.hpp"
#include "meshloc/match/matcher.hpp"
#include "meshloc/num/ops.hpp"
#include "meshloc/train/ground_truth.hpp"

namespace meshloc::train {

struct LossWeights {
  double lambda_s = 2.0;
  double lambda_o = 15.0;
  double lambda_n = 0.2;
  std::vector<double> margins = {0.35, 0.30, 0.25, 0.20, 0.15, 0.10};  // levels 1..6

  void validate(int level_count) const;  // throws ConfigError
};

struct LossParts {
  num::Var total;
  num::Var confidence;
  num::Var similarity;
  num::Var offset;
  num::Var norm;
  bool offset_empty = false;  // no vertex survived routing to the finest level

  double total_value() const { return total.value()[0]; }
};

/// Similarity hinge over levels 1..L-1 with teacher forcing: positives are
/// the ground-truth cells, negatives the siblings under the ground-truth
/// parent, margin per level.
num::Var similarity_loss(num::Tape& tape, const std::vector<num::Var>& e_levels,
                         const std::vector<num::Var>& f_levels, const GroundTruth& gt,
                         const img::GridHierarchy& grid, const LossWeights& weights);

/// Squared sub-cell offset error over the vertices that survived routing,
/// counted only when routed to the correct finest cell, normalized by the
/// survivor count. `offset_empty` reports an empty survivor set.
num::Var offset_loss(num::Tape& tape, num::ParamSet& params, const std::vector<num::Var>& e_levels,
                     const std::vector<num::Var>& f_levels, const GroundTruth& gt,
                     const match::RouteState& routes, bool* offset_empty,
                     const std::string& match_prefix = "match.");

/// Binary cross-entropy on the confidence heads along the predicted route
/// (level 0 considers every vertex against the whole image).
num::Var confidence_loss(num::Tape& tape, num::ParamSet& params,
                         const std::vector<num::Var>& e_levels,
                         const std::vector<num::Var>& f_levels, const GroundTruth& gt,
                         const match::RouteState& routes,
                         const std::string& match_prefix = "match.");

/// Embedding-norm regularizer: per level, mean vertex norm plus mean cell norm.
num::Var norm_loss(num::Tape& tape, const std::vector<num::Var>& e_levels,
                   const std::vector<num::Var>& f_levels);

/// L = L_c + lambda_s L_s + lambda_o L_o + lambda_n L_n.
LossParts build_losses(num::Tape& tape, num::ParamSet& params,
                       const std::vector<num::Var>& e_levels,
                       const std::vector<num::Var>& f_levels, const GroundTruth& gt,
                       const match::RouteState& routes, const img::GridHierarchy& grid,
                       const LossWeights& weights, const std::string& match_prefix = "match.");

}  // namespace meshloc::train
