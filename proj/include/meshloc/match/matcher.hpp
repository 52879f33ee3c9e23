#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "meshloc/common/rng.hpp"
#include "meshloc/gnn/embedder.hpp"
#include "meshloc/img/cnn.hpp"
#include "meshloc/img/grid.hpp"
#include "meshloc/scene/camera.hpp"
#include "meshloc/scene/frame.hpp"

namespace meshloc::match {

/// Beam widths for decision levels 1..L-1 plus the confidence cutoff applied
/// at every level. The default beam schedule keeps one half-image candidate
/// and widens toward four final cells per vertex.
struct MatchConfig {
  std::vector<int> beams = {1, 3, 3, 3, 4, 4};
  double confidence_threshold = 0.5;
};

/// Registers the per-level confidence heads and the final offset head.
/// level_widths are the embedding widths per level; the offset head reads the
/// concatenated (cell, vertex) pair at the finest level.
void init_match_params(const std::vector<int>& level_widths, num::ParamSet& params, Rng& rng,
                       const std::string& prefix = "match.");

/// sigmoid(W |f - e| + b): probability that vertex embedding e belongs to the
/// cell with embedding f.
double confidence_of(const Eigen::VectorXd& f, const Eigen::VectorXd& e, const Eigen::VectorXd& W,
                     double b);

/// Convenience over the parameter set for one level.
double confidence_of(const num::ParamSet& params, int level, const Eigen::VectorXd& f,
                     const Eigen::VectorXd& e, const std::string& prefix = "match.");

/// sigmoid(W (f || e) + b), two outputs in (0,1): fractional position inside
/// the finest-level cell.
Eigen::Vector2d predict_offset(const Eigen::VectorXd& f, const Eigen::VectorXd& e,
                               const Eigen::MatrixXd& W, const Eigen::Vector2d& b);

Eigen::Vector2d predict_offset(const num::ParamSet& params, const Eigen::VectorXd& f,
                               const Eigen::VectorXd& e, const std::string& prefix = "match.");

struct RouteCandidate {
  int cell = -1;
  double distance = 0.0;
  double confidence = 0.0;
};

struct VertexRoute {
  bool alive = false;                              // survived to the finest level
  std::vector<std::vector<RouteCandidate>> levels;  // survivors per level (empty once dropped)
};

struct RouteState {
  std::vector<VertexRoute> vertices;
  int level_count = 0;

  /// Number of vertices carrying at least one candidate at the finest level.
  int survivor_count() const;
};

/// Hierarchical beam routing. Level 0 keeps a vertex when the whole-image
/// confidence clears the threshold; each deeper level ranks the children of
/// the surviving cells by embedding distance, keeps the level's beam, then
/// drops candidates below the confidence threshold. Runs vertices in
/// parallel against read-only embeddings.
RouteState route_vertices(const gnn::VertexDescriptorSet& descriptors,
                          const img::CellEmbeddingSet& cells, const img::GridHierarchy& grid,
                          const num::ParamSet& params, const MatchConfig& config,
                          const std::string& prefix = "match.");

/// Depth-map lookup policy. Nearest-integer sampling is the default; the
/// sub-pixel mode interpolates bilinearly between pixel centers and falls
/// back to the nearest sample around depth edges (neighbor spread beyond
/// edge_tolerance relative to the depth) or invalid neighbors.
struct DepthSampling {
  bool subpixel = false;
  double edge_tolerance = 0.05;
};

/// Depth at a continuous pixel position under the given policy; 0 when the
/// sample is invalid.
double sample_depth(const scene::Image& depth, double u, double v, const DepthSampling& policy);

struct Correspondence {
  int vertex = -1;
  int cell = -1;  // finest-level cell
  double u = 0.0, v = 0.0, depth = 0.0;
  Eigen::Vector3d world = Eigen::Vector3d::Zero();   // original scene coordinates
  Eigen::Vector3d camera = Eigen::Vector3d::Zero();  // back-projected camera-space point
  bool is_static = true;
  double confidence = 0.0;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
};

/// Turns surviving routes into 3D-3D pairs: offset head gives the sub-cell
/// pixel, depth is read at the nearest integer pixel, pairs with invalid
/// depth are dropped.
CorrespondenceSet extract_correspondences(const RouteState& routes,
                                          const gnn::VertexDescriptorSet& descriptors,
                                          const img::CellEmbeddingSet& cells,
                                          const img::GridHierarchy& grid,
                                          const scene::Image& depth,
                                          const scene::PinholeCamera& cam,
                                          const Eigen::MatrixX3d& world_positions,
                                          const std::vector<std::uint8_t>& vertex_static,
                                          const num::ParamSet& params,
                                          const std::string& prefix = "match.",
                                          const DepthSampling& depth_sampling = {});

/// Debug dump: one text row per pair,
/// "vertex_id level6_cell u v depth x_w y_w z_w static confidence".
void dump_correspondences(const std::string& path, const CorrespondenceSet& set);

}  // namespace meshloc::match
