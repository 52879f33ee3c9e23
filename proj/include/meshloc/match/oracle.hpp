#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "meshloc/match/matcher.hpp"
#include "meshloc/train/ground_truth.hpp"

namespace meshloc::match {

/// Ground-truth-constructed embeddings that isolate the geometric pipeline:
/// cell embeddings are seeded random (pairwise distinct), each visible
/// vertex's subvector is copied from its correct cell so distance routing is
/// exact, and invisible vertices are pushed away from the whole-image
/// embedding so the level-0 confidence gate rejects them.
struct OracleEmbeddings {
  img::CellEmbeddingSet cells;
  gnn::VertexDescriptorSet descriptors;
};

OracleEmbeddings build_oracle_embeddings(const img::GridHierarchy& grid,
                                         const std::vector<int>& split,
                                         const train::GroundTruth& gt, std::uint64_t seed);

/// Confidence heads that saturate for exact matches (|f-e| = 0 gives a
/// probability close to 1, any mismatch close to 0) and a centered offset
/// head. Registered under the usual "match." names.
void init_oracle_match_params(const std::vector<int>& level_widths, num::ParamSet& params,
                              const std::string& prefix = "match.");

}  // namespace meshloc::match
