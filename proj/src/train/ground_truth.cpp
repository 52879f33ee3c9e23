#include "meshloc/train/ground_truth.hpp"

#include <algorithm>
#include <cmath>

#include "meshloc/common/errors.hpp"

namespace meshloc::train {

GroundTruth generate_ground_truth(const Eigen::MatrixX3d& world_positions,
                                  const scene::RigidTransform& pose_gt,
                                  const scene::PinholeCamera& cam, const scene::Image& depth,
                                  const img::GridHierarchy& grid, const OcclusionConfig& occ,
                                  double scene_scale) {
  if (depth.width != grid.width() || depth.height != grid.height() || depth.channels != 1)
    throw DataError("generate_ground_truth: depth map does not match the grid frame");
  const int levels = grid.level_count();
  GroundTruth gt;
  gt.level_count = levels;
  gt.vertices.assign(static_cast<std::size_t>(world_positions.rows()), VertexGroundTruth{});

  for (int v = 0; v < world_positions.rows(); ++v) {
    const auto proj = scene::project_point(cam, pose_gt, world_positions.row(v).transpose());
    if (!proj) continue;
    const int px = std::clamp(static_cast<int>(proj->u), 0, depth.width - 1);
    const int py = std::clamp(static_cast<int>(proj->v), 0, depth.height - 1);
    const double measured = depth.at(0, py, px);
    const double tol = std::max(occ.relative * proj->depth, occ.absolute * scene_scale);
    if (std::abs(proj->depth - measured) > tol) continue;  // occluded or hole

    VertexGroundTruth& rec = gt.vertices[static_cast<std::size_t>(v)];
    rec.visible = true;
    rec.pixel = {proj->u, proj->v};
    rec.depth = proj->depth;
    rec.cells.resize(static_cast<std::size_t>(levels));
    for (int l = 0; l < levels; ++l)
      rec.cells[static_cast<std::size_t>(l)] = grid.locate_cell(l, proj->u, proj->v);
    const int last = levels - 1;
    const auto [ox, oy] = grid.cell_origin(last, rec.cells[static_cast<std::size_t>(last)]);
    rec.offset.x() = (proj->u - ox) / grid.level(last).cell_w;
    rec.offset.y() = (proj->v - oy) / grid.level(last).cell_h;
  }
  return gt;
}

}  // namespace meshloc::train
