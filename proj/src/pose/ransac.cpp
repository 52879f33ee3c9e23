#include <algorithm>

#include "meshloc/common/parallel.hpp"
#include "meshloc/common/rng.hpp"
#include "meshloc/pose/solver.hpp"

namespace meshloc::pose {

double score_hypothesis(const scene::RigidTransform& world_to_cam,
                        const match::CorrespondenceSet& pairs, double score_eps) {
  const scene::RigidTransform cam_to_world = world_to_cam.inverse();
  double acc = 0.0;
  long n = 0;
  for (const auto& p : pairs.pairs) {
    if (!p.is_static) continue;
    acc += (cam_to_world.apply(p.camera) - p.world).squaredNorm();
    ++n;
  }
  if (n == 0) return 0.0;
  return 1.0 / (acc / static_cast<double>(n) + score_eps);
}

std::optional<scene::RigidTransform> ransac_pose(const match::CorrespondenceSet& pairs,
                                                 std::span<const Eigen::Vector3d> static_world_pts,
                                                 const SolverConfig& config) {
  const int n = static_cast<int>(pairs.pairs.size());
  if (n < 3 || config.iterations < 1) return std::nullopt;

  const double far_min = config.far_min * config.scene_scale;
  const double rigid_tol = config.rigid_tol * config.scene_scale;

  // Samples are drawn serially from one seeded stream: the canonical order is
  // the iteration index, so threaded scoring reproduces the single-thread
  // result exactly.
  Rng rng(config.seed);
  struct Hypothesis {
    scene::RigidTransform transform;
    long iteration;
  };
  std::vector<Hypothesis> hypotheses;
  hypotheses.reserve(static_cast<std::size_t>(config.iterations) / 4 + 8);
  for (long it = 0; it < config.iterations; ++it) {
    int a = static_cast<int>(rng.index(static_cast<std::uint64_t>(n)));
    int b = static_cast<int>(rng.index(static_cast<std::uint64_t>(n)));
    int c = static_cast<int>(rng.index(static_cast<std::uint64_t>(n)));
    if (a == b || b == c || a == c) continue;  // degenerate draw burns the iteration
    const std::array<Eigen::Vector3d, 3> cam = {pairs.pairs[a].camera, pairs.pairs[b].camera,
                                                pairs.pairs[c].camera};
    const std::array<Eigen::Vector3d, 3> world = {pairs.pairs[a].world, pairs.pairs[b].world,
                                                  pairs.pairs[c].world};
    if (!far_enough(cam, far_min) || !rigid_check(cam, world, rigid_tol)) continue;
    const auto t = kabsch_align(cam, world);
    if (!t) continue;
    hypotheses.push_back({*t, it});
  }
  if (hypotheses.empty()) return std::nullopt;

  std::vector<double> scores(hypotheses.size());
  parallel_for(static_cast<long>(hypotheses.size()), [&](long i) {
    scores[static_cast<std::size_t>(i)] =
        score_hypothesis(hypotheses[static_cast<std::size_t>(i)].transform, pairs,
                         config.score_eps);
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < hypotheses.size(); ++i)
    if (scores[i] > scores[best]) best = i;  // ties keep the earliest iteration

  std::vector<Eigen::Vector3d> static_cloud;
  static_cloud.reserve(pairs.pairs.size());
  for (const auto& p : pairs.pairs)
    if (p.is_static) static_cloud.push_back(p.camera);

  if (static_cloud.empty() || static_world_pts.empty()) return hypotheses[best].transform;
  return icp_refine(hypotheses[best].transform, static_cloud, static_world_pts, config).transform;
}

}  // namespace meshloc::pose
