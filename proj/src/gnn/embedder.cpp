#include "meshloc/gnn/embedder.hpp"

#include <cmath>
#include <numeric>

#include "meshloc/common/errors.hpp"

namespace meshloc::gnn {

using num::ParamSet;
using num::Tape;
using num::Tensor;
using num::Var;

int GnnConfig::output_width() const {
  return std::accumulate(split.begin(), split.end(), 0);
}

void GnnConfig::validate() const {
  if (input_width <= 0 || stem_width <= 0) throw ConfigError("GnnConfig: widths must be positive");
  if (blocks.empty()) throw ConfigError("GnnConfig: at least one attention block required");
  for (const auto& b : blocks) {
    if (b.heads <= 0 || b.output_width <= 0)
      throw ConfigError("GnnConfig: block heads and width must be positive");
    if (b.output_width % b.heads != 0)
      throw ConfigError("GnnConfig: block width " + std::to_string(b.output_width) +
                        " not divisible by " + std::to_string(b.heads) + " heads");
  }
  if (split.empty()) throw ConfigError("GnnConfig: empty subvector split");
  for (int w : split)
    if (w <= 0) throw ConfigError("GnnConfig: split entries must be positive");
  if (!(attention_slope > 0.0 && attention_slope < 1.0))
    throw ConfigError("GnnConfig: attention slope must lie in (0,1)");
}

EdgeList build_edge_list(const std::vector<std::vector<int>>& adjacency) {
  EdgeList edges;
  edges.node_count = static_cast<int>(adjacency.size());
  std::size_t total = adjacency.size();
  for (const auto& n : adjacency) total += n.size();
  edges.seg.reserve(total);
  edges.nbr.reserve(total);
  for (int i = 0; i < edges.node_count; ++i) {
    edges.seg.push_back(i);
    edges.nbr.push_back(i);
    for (int j : adjacency[static_cast<std::size_t>(i)]) {
      edges.seg.push_back(i);
      edges.nbr.push_back(j);
    }
  }
  return edges;
}

num::Tensor build_vertex_features(const scene::TriangleMesh& mesh, const FeatureMask& mask) {
  const int V = mesh.vertex_count();
  Tensor features({V, 12});
  auto M = features.matrix();
  if (mask.position) M.middleCols(0, 3) = mesh.positions;
  if (mask.normal) M.middleCols(3, 3) = mesh.normals;
  if (mask.color) M.middleCols(6, 3) = mesh.colors;
  if (mask.semantic) M.middleCols(9, 3) = mesh.semantics;
  return features;
}

namespace {

Tensor glorot(int rows, int cols, Rng& rng) {
  Tensor t({rows, cols});
  const double limit = std::sqrt(6.0 / (rows + cols));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

Tensor glorot_vec(int n, int fan, Rng& rng) {
  Tensor t({n});
  const double limit = std::sqrt(6.0 / (fan + 1));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

std::string block_prefix(const std::string& prefix, int b) {
  return prefix + "block" + std::to_string(b) + ".";
}

}  // namespace

void init_gnn_params(const GnnConfig& config, ParamSet& params, Rng& rng,
                     const std::string& prefix) {
  config.validate();
  params.add(prefix + "input.W", glorot(config.stem_width, config.input_width, rng));
  params.add(prefix + "input.b", Tensor::zeros({config.stem_width}));
  int width = config.stem_width;
  for (std::size_t b = 0; b < config.blocks.size(); ++b) {
    const auto& blk = config.blocks[b];
    const std::string bp = block_prefix(prefix, static_cast<int>(b));
    params.add(bp + "norm.gamma", Tensor::full({width}, 1.0));
    params.add(bp + "norm.beta", Tensor::zeros({width}));
    const int head_width = blk.output_width / blk.heads;
    for (int h = 0; h < blk.heads; ++h) {
      const std::string hp = bp + "head" + std::to_string(h) + ".";
      params.add(hp + "W", glorot(head_width, width, rng));
      params.add(hp + "Wa", glorot_vec(2 * head_width, 2 * head_width, rng));
    }
    width = blk.output_width;
  }
  params.add(prefix + "output.W", glorot(config.output_width(), width, rng));
  params.add(prefix + "output.b", Tensor::zeros({config.output_width()}));
}

Var gat_layer(Tape& tape, Var H, const EdgeList& edges, ParamSet& params,
              const std::string& prefix, const GatBlockConfig& block, AttentionMode mode,
              double slope, std::vector<Tensor>* attention_out) {
  const int V = edges.node_count;
  if (tape.value(H).dim(0) != V)
    throw std::invalid_argument("gat_layer: feature rows (" +
                                std::to_string(tape.value(H).dim(0)) +
                                ") do not cover the adjacency (" + std::to_string(V) + " nodes)");
  const int head_width = block.output_width / block.heads;

  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(block.heads));
  for (int h = 0; h < block.heads; ++h) {
    const std::string hp = prefix + "head" + std::to_string(h) + ".";
    Var W = tape.param(params, hp + "W");
    if (tape.value(W).dim(1) != tape.value(H).dim(1))
      throw std::invalid_argument("gat_layer: width mismatch, features " +
                                  tape.value(H).shape_str() + " vs weight " +
                                  tape.value(W).shape_str());
    Var Z = num::matmul_nt(H, W);  // V x head_width

    Var alpha;  // one weight per edge
    if (mode == AttentionMode::Gat) {
      Var Wa = tape.param(params, hp + "Wa");
      Var wa_self = num::reshape(num::slice_cols(num::reshape(Wa, {1, 2 * head_width}), 0, head_width),
                                 std::vector<int>{head_width});
      Var wa_nbr = num::reshape(
          num::slice_cols(num::reshape(Wa, {1, 2 * head_width}), head_width, head_width),
          std::vector<int>{head_width});
      Var s_self = num::matvec(Z, wa_self);  // V
      Var s_nbr = num::matvec(Z, wa_nbr);    // V
      Var scores = num::leaky_relu(
          num::add(num::gather(s_self, edges.seg), num::gather(s_nbr, edges.nbr)), slope);
      alpha = num::segmented_softmax(scores, edges.seg, V);
    } else {
      // uniform aggregation over N(i) u {i}
      std::vector<double> deg(static_cast<std::size_t>(V), 0.0);
      for (int s : edges.seg) deg[static_cast<std::size_t>(s)] += 1.0;
      Tensor uniform({static_cast<int>(edges.seg.size())});
      for (std::size_t e = 0; e < edges.seg.size(); ++e)
        uniform[static_cast<Eigen::Index>(e)] = 1.0 / deg[static_cast<std::size_t>(edges.seg[e])];
      alpha = tape.constant(std::move(uniform));
    }
    if (attention_out) attention_out->push_back(tape.value(alpha));

    Var Zj = num::gather_rows(Z, edges.nbr);
    Var aggregated = num::segment_sum_rows(num::scale_rows(Zj, alpha), edges.seg, V);
    heads.push_back(num::leaky_relu(aggregated, slope));
  }
  return block.heads == 1 ? heads[0] : num::concat_cols(heads);
}

Var embed_vertices_t(Tape& tape, ParamSet& params, const Tensor& features, const EdgeList& edges,
                     const GnnConfig& config, const std::string& prefix) {
  config.validate();
  if (features.rank() != 2 || features.dim(1) != config.input_width)
    throw std::invalid_argument("embed_vertices: features must be V x " +
                                std::to_string(config.input_width) + ", got " +
                                features.shape_str());
  Var X = tape.constant(features);
  Var H = num::add_rows(num::matmul_nt(X, tape.param(params, prefix + "input.W")),
                        tape.param(params, prefix + "input.b"));
  for (std::size_t b = 0; b < config.blocks.size(); ++b) {
    const std::string bp = block_prefix(prefix, static_cast<int>(b));
    try {
      Var normed = num::layer_norm_rows(H, tape.param(params, bp + "norm.gamma"),
                                        tape.param(params, bp + "norm.beta"));
      H = gat_layer(tape, normed, edges, params, bp, config.blocks[b], config.attention,
                    config.attention_slope);
    } catch (const NumericalError& e) {
      throw NumericalError("embed_vertices: block " + std::to_string(b) + ": " + e.what());
    }
  }
  return num::add_rows(num::matmul_nt(H, tape.param(params, prefix + "output.W")),
                       tape.param(params, prefix + "output.b"));
}

VertexDescriptorSet embed_vertices(const scene::TriangleMesh& normalized_mesh,
                                   const std::vector<std::vector<int>>& adjacency,
                                   const GnnConfig& config, ParamSet& params) {
  const EdgeList edges = build_edge_list(adjacency);
  const Tensor features = build_vertex_features(normalized_mesh, config.mask);
  Tape tape;
  Var out = embed_vertices_t(tape, params, features, edges, config);
  VertexDescriptorSet set;
  set.descriptors = tape.value(out).matrix();
  set.split = config.split;
  set.offsets.resize(set.split.size());
  int off = 0;
  for (std::size_t l = 0; l < set.split.size(); ++l) {
    set.offsets[l] = off;
    off += set.split[l];
  }
  return set;
}

}  // namespace meshloc::gnn
