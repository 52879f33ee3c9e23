#include "meshloc/synth/localize.hpp"

#include "meshloc/common/errors.hpp"
#include "meshloc/match/oracle.hpp"
#include "meshloc/train/ground_truth.hpp"

namespace meshloc::synth {

using match::CorrespondenceSet;
using match::RouteState;
using scene::RigidTransform;

SceneBundle SceneBundle::build(scene::TriangleMesh mesh, const scene::PinholeCamera& cam,
                               gnn::VertexDescriptorSet descriptors) {
  SceneBundle bundle;
  bundle.mesh = std::move(mesh);
  auto [normalized, norm] = scene::normalize_mesh(bundle.mesh);
  (void)normalized;
  bundle.norm = norm;
  bundle.cam = cam;
  for (int v = 0; v < bundle.mesh.vertex_count(); ++v)
    if (bundle.mesh.vertex_static.empty() || bundle.mesh.vertex_static[static_cast<std::size_t>(v)])
      bundle.static_world.push_back(bundle.mesh.positions.row(v).transpose());
  bundle.descriptors = std::move(descriptors);
  return bundle;
}

namespace {

/// Oracle-mode extraction: every surviving vertex is paired through its
/// ground-truth cell, offset and projected depth. The learned offset head
/// cannot express per-vertex offsets when e is copied from f, and mesh
/// vertices sit on creases and occluding contours where any depth-map sample
/// is ill-defined, so the pair is constructed from the ground truth; the
/// frame's depth map still decides visibility (an empty depth map stays a
/// NaN frame). This keeps routing, beams, confidence gating and the full
/// solver chain under test with exact inputs.
CorrespondenceSet extract_with_gt_offsets(const RouteState& routes,
                                          const train::GroundTruth& gt,
                                          const img::GridHierarchy& grid,
                                          const scene::Image& depth,
                                          const scene::PinholeCamera& cam,
                                          const scene::TriangleMesh& mesh,
                                          const match::DepthSampling& sampling) {
  const int last = routes.level_count - 1;
  CorrespondenceSet out;
  for (std::size_t v = 0; v < routes.vertices.size(); ++v) {
    const auto& route = routes.vertices[v];
    const auto& rec = gt.vertices[v];
    if (!route.alive || !rec.visible) continue;
    const int gt_cell = rec.cells[static_cast<std::size_t>(last)];
    for (const auto& cand : route.levels[static_cast<std::size_t>(last)]) {
      if (cand.cell != gt_cell) continue;
      const auto [ox, oy] = grid.cell_origin(last, gt_cell);
      const double u = ox + rec.offset.x() * grid.level(last).cell_w;
      const double pv = oy + rec.offset.y() * grid.level(last).cell_h;
      if (match::sample_depth(depth, u, pv, sampling) <= 0.0) continue;
      const double d = rec.depth;
      match::Correspondence pair;
      pair.vertex = static_cast<int>(v);
      pair.cell = gt_cell;
      pair.u = u;
      pair.v = pv;
      pair.depth = d;
      pair.world = mesh.positions.row(static_cast<Eigen::Index>(v));
      pair.camera = scene::backproject_pixel(cam, u, pv, d);
      pair.is_static = mesh.vertex_static.empty() ||
                       mesh.vertex_static[v] != 0;
      pair.confidence = cand.confidence;
      out.pairs.push_back(std::move(pair));
    }
  }
  return out;
}

}  // namespace

LocalizeResult run_localize(const SceneBundle& bundle, const scene::FrameRecord& frame,
                            num::ParamSet& params, const img::GridHierarchy& grid,
                            const img::CnnConfig& cnn_cfg, const LocalizeParams& lp,
                            LocalizeMode mode) {
  LocalizeResult result;

  pose::SolverConfig solver = lp.solver;
  solver.scene_scale = bundle.norm.scale;

  const train::GroundTruth gt = generate_ground_truth(
      bundle.mesh.positions, frame.pose, bundle.cam, frame.depth, grid, lp.occlusion,
      bundle.norm.scale);
  result.visible_vertices = gt.visible_count();

  RouteState routes;
  CorrespondenceSet pairs;
  if (mode == LocalizeMode::OracleEmbedding) {
    const match::OracleEmbeddings oracle = match::build_oracle_embeddings(
        grid, cnn_cfg.head_widths, gt, lp.oracle_seed);
    num::ParamSet oracle_params;
    match::init_oracle_match_params(cnn_cfg.head_widths, oracle_params);
    routes = match::route_vertices(oracle.descriptors, oracle.cells, grid, oracle_params,
                                   lp.routing);
    pairs = extract_with_gt_offsets(routes, gt, grid, frame.depth, bundle.cam, bundle.mesh,
                                    lp.depth_sampling);
  } else {
    if (bundle.descriptors.descriptors.rows() != bundle.mesh.vertex_count())
      throw DataError("run_localize: descriptor cache does not match the mesh");
    const num::Tensor rgbd = img::frame_to_tensor(frame, lp.depth_max_range);
    const img::CellEmbeddingSet cells = img::embed_image(rgbd, grid, cnn_cfg, params);
    routes = match::route_vertices(bundle.descriptors, cells, grid, params, lp.routing);
    pairs = match::extract_correspondences(routes, bundle.descriptors, cells, grid, frame.depth,
                                           bundle.cam, bundle.mesh.positions,
                                           bundle.mesh.vertex_static, params, "match.",
                                           lp.depth_sampling);
  }

  result.survivors = routes.survivor_count();
  result.correspondence_count = static_cast<int>(pairs.pairs.size());

  // routing quality against the ground truth
  if (result.visible_vertices > 0) {
    const int last = grid.level_count() - 1;
    int hits = 0;
    for (std::size_t v = 0; v < routes.vertices.size(); ++v) {
      const auto& rec = gt.vertices[v];
      const auto& route = routes.vertices[v];
      if (!rec.visible || !route.alive) continue;
      for (const auto& cand : route.levels[static_cast<std::size_t>(last)])
        if (cand.cell == rec.cells[static_cast<std::size_t>(last)]) {
          ++hits;
          break;
        }
    }
    result.routing_hit_rate = static_cast<double>(hits) / result.visible_vertices;
  }

  result.pose = pose::ransac_pose(pairs, bundle.static_world, solver);
  if (result.pose && lp.icp_fine_gate > 0.0) {
    // fine alignment pass: a tight gate sheds depth-edge contaminated points
    std::vector<Eigen::Vector3d> static_cloud;
    for (const auto& p : pairs.pairs)
      if (p.is_static) static_cloud.push_back(p.camera);
    pose::SolverConfig fine = solver;
    fine.icp_gate = lp.icp_fine_gate;
    if (!static_cloud.empty())
      result.pose = pose::icp_refine(*result.pose, static_cloud, bundle.static_world, fine)
                        .transform;
  }
  result.metrics.has_pose = result.pose.has_value();
  if (result.pose) {
    const auto [te, re] = pose::pose_error(*result.pose, frame.pose);
    result.metrics.translation_error = te;
    result.metrics.rotation_error_deg = re;
    const auto dcre = pose::dcre_of_frame(frame.depth, bundle.cam, *result.pose, frame.pose);
    result.metrics.dcre_valid = dcre.has_value();
    if (dcre) result.metrics.dcre = *dcre;
  }
  return result;
}

}  // namespace meshloc::synth
