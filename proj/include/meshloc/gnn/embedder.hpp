#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "meshloc/common/rng.hpp"
#include "meshloc/num/ops.hpp"
#include "meshloc/scene/mesh.hpp"

namespace meshloc::gnn {

/// One attention block: `output_width` is the concatenated width across heads
/// (must divide evenly by the head count).
struct GatBlockConfig {
  int heads = 4;
  int output_width = 64;
};

enum class AttentionMode { Gat, GcnUniform };

/// Which of the four vertex feature groups reach the network; masked groups
/// are zeroed in place so widths stay stable.
struct FeatureMask {
  bool position = true;
  bool normal = true;
  bool color = true;
  bool semantic = true;
};

struct GnnConfig {
  int input_width = 12;
  int stem_width = 16;
  std::vector<GatBlockConfig> blocks = {{4, 32}, {4, 32}, {4, 64}, {4, 64},
                                        {4, 128}, {4, 128}, {4, 256}};
  std::vector<int> split = {256, 128, 128, 64, 64, 64, 64};
  AttentionMode attention = AttentionMode::Gat;
  FeatureMask mask;
  double attention_slope = 0.2;  // LeakyReLU slope inside attention

  int output_width() const;
  void validate() const;  // throws ConfigError
};

/// Per-vertex descriptors with per-level subvector views.
struct VertexDescriptorSet {
  Eigen::MatrixXd descriptors;  // V x output_width
  std::vector<int> split;
  std::vector<int> offsets;  // column offset per level

  int level_count() const { return static_cast<int>(split.size()); }
  auto level(int l) const {
    return descriptors.middleCols(offsets.at(static_cast<std::size_t>(l)),
                                  split.at(static_cast<std::size_t>(l)));
  }
};

/// Flattened undirected adjacency with self edges, grouped by target vertex:
/// edge e aggregates source nbr[e] into target seg[e]. Per target the self
/// edge comes first, then neighbors ascending.
struct EdgeList {
  std::vector<int> seg;
  std::vector<int> nbr;
  int node_count = 0;
};

EdgeList build_edge_list(const std::vector<std::vector<int>>& adjacency);

/// 12-wide feature rows [position | normal | color | semantic] with masked
/// groups zeroed. Positions are expected in normalized coordinates.
num::Tensor build_vertex_features(const scene::TriangleMesh& mesh, const FeatureMask& mask);

/// Registers all embedder parameters under `prefix` (default "gnn.").
void init_gnn_params(const GnnConfig& config, num::ParamSet& params, Rng& rng,
                     const std::string& prefix = "gnn.");

/// One multi-head attention layer on the tape. H is V x width_in. When
/// `attention_out` is given, the per-head edge weights (aligned with
/// EdgeList order) are appended to it.
num::Var gat_layer(num::Tape& tape, num::Var H, const EdgeList& edges, num::ParamSet& params,
                   const std::string& prefix, const GatBlockConfig& block, AttentionMode mode,
                   double slope, std::vector<num::Tensor>* attention_out = nullptr);

/// Full embedder on the tape: stem linear, GATNorm blocks, output linear.
/// Returns the V x output_width descriptor matrix.
num::Var embed_vertices_t(num::Tape& tape, num::ParamSet& params, const num::Tensor& features,
                          const EdgeList& edges, const GnnConfig& config,
                          const std::string& prefix = "gnn.");

/// Inference convenience: runs the tape forward once and splits the result.
VertexDescriptorSet embed_vertices(const scene::TriangleMesh& normalized_mesh,
                                   const std::vector<std::vector<int>>& adjacency,
                                   const GnnConfig& config, num::ParamSet& params);

}  // namespace meshloc::gnn
