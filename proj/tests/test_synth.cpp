#include <doctest.h>

#include "meshloc/common/rng.hpp"
#include "meshloc/synth/localize.hpp"
#include "meshloc/synth/render.hpp"
#include "meshloc/synth/scene_gen.hpp"

using namespace meshloc;
using namespace meshloc::synth;

TEST_CASE("generate_scene: determinism, validity, dynamic counting") {
  SceneParams params;
  params.object_count = 10;
  params.dynamic_fraction = 0.3;
  SyntheticScene a = generate_scene(42, params);
  SyntheticScene b = generate_scene(42, params);

  CHECK((a.mesh.positions.array() == b.mesh.positions.array()).all());
  CHECK((a.mesh.colors.array() == b.mesh.colors.array()).all());
  CHECK(a.trajectory.size() == b.trajectory.size());
  for (std::size_t k = 0; k < a.trajectory.size(); ++k)
    CHECK((a.trajectory[k].matrix() - b.trajectory[k].matrix()).cwiseAbs().maxCoeff() == 0.0);

  // mesh invariants
  for (int f = 0; f < a.mesh.face_count(); ++f)
    for (int k = 0; k < 3; ++k) {
      CHECK(a.mesh.faces(f, k) >= 0);
      CHECK(a.mesh.faces(f, k) < a.mesh.vertex_count());
    }
  for (int v = 0; v < a.mesh.vertex_count(); ++v)
    CHECK(a.mesh.normals.row(v).norm() == doctest::Approx(1.0).epsilon(1e-9));

  // exactly 3 dynamic objects, displaced in later configurations only
  int dynamic_objects = 0;
  for (bool d : a.object_dynamic) dynamic_objects += d ? 1 : 0;
  CHECK(dynamic_objects == 3);
  for (std::size_t o = 0; o < a.object_dynamic.size(); ++o) {
    CHECK(a.configurations[0].object_motion[o].matrix().isIdentity(0.0));
    if (a.object_dynamic[o] && a.configurations.size() > 1)
      CHECK_FALSE(a.configurations[1].object_motion[o].matrix().isIdentity(1e-12));
  }
  // every pose is a valid rigid transform
  for (const auto& pose : a.trajectory) CHECK(pose.is_rigid(1e-9));
  // dynamic-flagged vertices follow their palette entries
  int dynamic_vertices = 0;
  for (auto flag : a.mesh.vertex_static) dynamic_vertices += flag ? 0 : 1;
  CHECK(dynamic_vertices > 0);
}

TEST_CASE("generate_scene: infeasible parameters rejected") {
  SceneParams params;
  params.room_size = {0.2, 0.2, 0.2};
  CHECK_THROWS_AS(generate_scene(1, params), ConfigError);
  SceneParams zero;
  zero.object_count = 0;
  CHECK_THROWS_AS(generate_scene(1, zero), ConfigError);
}

TEST_CASE("render_rgbd: flat triangle depth, z-ordering, projection cross-check") {
  scene::PinholeCamera cam{320.0, 320.0, 256.0, 144.0, 512, 288};

  SUBCASE("screen-parallel surface renders at its depth") {
    // a huge two-triangle quad at z = d, parallel to the image plane
    SyntheticScene sc;
    sc.intrinsics = cam;
    sc.configurations.push_back({{}, 1.0});
    const double d = 2.5;
    sc.mesh.positions.resize(4, 3);
    sc.mesh.positions << -10, -10, d, 10, -10, d, 10, 10, d, -10, 10, d;
    sc.mesh.normals = Eigen::MatrixX3d::Zero(4, 3);
    sc.mesh.normals.col(2).setConstant(-1.0);
    sc.mesh.colors = Eigen::MatrixX3d::Constant(4, 3, 0.5);
    sc.mesh.semantics = sc.mesh.colors;
    sc.mesh.faces.resize(2, 3);
    sc.mesh.faces << 0, 1, 2, 0, 2, 3;
    sc.mesh.vertex_static.assign(4, 1);

    scene::FrameRecord frame = render_rgbd(sc, 0, scene::RigidTransform{}, cam);
    int covered = 0;
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x)
        if (frame.depth.at(0, y, x) > 0) {
          ++covered;
          CHECK(frame.depth.at(0, y, x) == doctest::Approx(d).epsilon(1e-6));
        }
    CHECK(covered == cam.width * cam.height);
  }

  SUBCASE("nearer geometry wins the z-buffer") {
    SyntheticScene sc;
    sc.intrinsics = cam;
    sc.configurations.push_back({{}, 1.0});
    sc.mesh.positions.resize(8, 3);
    // far quad (red) then near quad (green), both axis-aligned
    sc.mesh.positions << -5, -5, 4, 5, -5, 4, 5, 5, 4, -5, 5, 4,
                         -1, -1, 2, 1, -1, 2, 1, 1, 2, -1, 1, 2;
    sc.mesh.normals = Eigen::MatrixX3d::Zero(8, 3);
    sc.mesh.normals.col(2).setConstant(-1.0);
    sc.mesh.colors.resize(8, 3);
    sc.mesh.colors.topRows(4) = Eigen::MatrixX3d::Zero(4, 3);
    sc.mesh.colors.block(0, 0, 4, 1).setConstant(1.0);  // red far plane
    sc.mesh.colors.bottomRows(4) = Eigen::MatrixX3d::Zero(4, 3);
    sc.mesh.colors.block(4, 1, 4, 1).setConstant(1.0);  // green near plane
    sc.mesh.semantics = sc.mesh.colors;
    sc.mesh.faces.resize(4, 3);
    sc.mesh.faces << 0, 1, 2, 0, 2, 3, 4, 5, 6, 4, 6, 7;
    sc.mesh.vertex_static.assign(8, 1);

    scene::FrameRecord frame = render_rgbd(sc, 0, scene::RigidTransform{}, cam);
    // center of the image: near quad in front
    CHECK(frame.depth.at(0, 144, 256) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(frame.rgb.at(1, 144, 256) == doctest::Approx(1.0));
    CHECK(frame.rgb.at(0, 144, 256) == doctest::Approx(0.0));
    // near the border: only the far quad
    CHECK(frame.depth.at(0, 20, 30) == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(frame.rgb.at(0, 20, 30) == doctest::Approx(1.0));
  }

  SUBCASE("rendered depth agrees with projected depth at visible vertices") {
    // a single slanted surface: every pixel is interpolation, no occlusion
    SyntheticScene sc;
    sc.intrinsics = cam;
    sc.configurations.push_back({{}, 1.0});
    sc.mesh.positions.resize(4, 3);
    sc.mesh.positions << -8, -8, 1.5, 8, -8, 3.5, 8, 8, 5.0, -8, 8, 3.0;  // tilted quad
    sc.mesh.normals = Eigen::MatrixX3d::Zero(4, 3);
    sc.mesh.normals.col(2).setConstant(-1.0);
    sc.mesh.colors = Eigen::MatrixX3d::Constant(4, 3, 0.4);
    sc.mesh.semantics = sc.mesh.colors;
    sc.mesh.faces.resize(2, 3);
    sc.mesh.faces << 0, 1, 2, 0, 2, 3;
    sc.mesh.vertex_static.assign(4, 1);
    scene::FrameRecord frame = render_rgbd(sc, 0, scene::RigidTransform{}, cam);

    // random points ON the surface, projected and compared at their pixel
    Rng rng(5);
    const Eigen::Vector3d a = sc.mesh.positions.row(0);
    const Eigen::Vector3d ab = sc.mesh.positions.row(1).transpose() - a;
    const Eigen::Vector3d ad = sc.mesh.positions.row(3).transpose() - a;
    int checked = 0, ok = 0;
    while (checked < 100) {
      const Eigen::Vector3d p = a + rng.uniform(0.05, 0.95) * ab + rng.uniform(0.05, 0.95) * ad;
      const auto proj = scene::project_point(cam, scene::RigidTransform{}, p);
      if (!proj) continue;
      const int px = static_cast<int>(proj->u), py = static_cast<int>(proj->v);
      if (px < 1 || px + 1 >= frame.depth.width || py < 1 || py + 1 >= frame.depth.height)
        continue;
      const double rendered = frame.depth.at(0, py, px);
      if (rendered <= 0.0) continue;
      ++checked;
      const double slope_u =
          0.5 * std::abs(frame.depth.at(0, py, px + 1) - frame.depth.at(0, py, px - 1));
      const double slope_v =
          0.5 * std::abs(frame.depth.at(0, py + 1, px) - frame.depth.at(0, py - 1, px));
      const double tol = 0.5 * (slope_u + slope_v) + 1e-6;
      ok += std::abs(rendered - proj->depth) <= tol ? 1 : 0;
    }
    CHECK(ok == 100);
  }

  SUBCASE("cluttered scene: ground-truth-visible vertices mostly agree with the depth map") {
    SceneParams params;
    SyntheticScene sc = generate_scene(7, params);
    const scene::RigidTransform pose = sc.trajectory[3];
    scene::FrameRecord frame = render_rgbd(sc, 0, pose, sc.intrinsics);
    img::GridHierarchy grid = img::GridHierarchy::build();
    train::GroundTruth gt = train::generate_ground_truth(sc.mesh.positions, pose, sc.intrinsics,
                                                         frame.depth, grid, {}, 2.0);
    int visible = 0, close = 0;
    for (int v = 0; v < sc.mesh.vertex_count(); ++v) {
      if (!gt.vertices[static_cast<std::size_t>(v)].visible) continue;
      const auto proj =
          scene::project_point(sc.intrinsics, pose, sc.mesh.positions.row(v).transpose());
      REQUIRE(proj.has_value());
      ++visible;
      const double rendered =
          frame.depth.at(0, static_cast<int>(proj->v), static_cast<int>(proj->u));
      close += std::abs(rendered - proj->depth) <= 0.02 * proj->depth + 0.02 ? 1 : 0;
    }
    REQUIRE(visible > 100);
    CHECK(close == visible);
  }

  SUBCASE("rendering is deterministic") {
    SceneParams params;
    SyntheticScene sc = generate_scene(11, params);
    scene::FrameRecord a = render_rgbd(sc, 1, sc.trajectory[0], sc.intrinsics);
    scene::FrameRecord b = render_rgbd(sc, 1, sc.trajectory[0], sc.intrinsics);
    CHECK(a.depth.data == b.depth.data);
    CHECK(a.rgb.data == b.rgb.data);
  }
}

TEST_CASE("run_localize: oracle-embedding mode recovers poses on noiseless frames") {
  SceneParams params;
  params.subdivision = 0.35;
  SyntheticScene sc = generate_scene(21, params);
  img::GridHierarchy grid = img::GridHierarchy::build();
  img::CnnConfig cnn_cfg;  // default head widths define the level widths
  LocalizeParams lp;
  lp.solver.seed = 5;
  lp.depth_sampling.subpixel = true;

  SceneBundle bundle = SceneBundle::build(sc.mesh, sc.intrinsics);
  num::ParamSet unused;

  int frames_run = 0;
  for (int k = 0; k < 4; ++k) {
    const scene::RigidTransform pose = sc.trajectory[static_cast<std::size_t>(k * 3)];
    scene::FrameRecord frame = render_rgbd(sc, 0, pose, sc.intrinsics);
    LocalizeResult r = run_localize(bundle, frame, unused, grid, cnn_cfg, lp,
                                    LocalizeMode::OracleEmbedding);
    if (r.visible_vertices < 20) continue;
    ++frames_run;
    CHECK(r.routing_hit_rate == 1.0);
    REQUIRE(r.metrics.has_pose);
    CHECK(r.metrics.translation_error < 1e-3 * bundle.norm.scale);
    CHECK(r.metrics.rotation_error_deg < 0.05);
  }
  CHECK(frames_run >= 3);
}

TEST_CASE("run_localize: an all-zero depth map is a NaN frame, not an exception") {
  SceneParams params;
  params.subdivision = 0.8;
  SyntheticScene sc = generate_scene(23, params);
  img::GridHierarchy grid = img::GridHierarchy::build();
  img::CnnConfig cnn_cfg;
  LocalizeParams lp;

  SceneBundle bundle = SceneBundle::build(sc.mesh, sc.intrinsics);
  num::ParamSet unused;
  scene::FrameRecord frame = render_rgbd(sc, 0, sc.trajectory[0], sc.intrinsics);
  for (double& d : frame.depth.data) d = 0.0;

  LocalizeResult r =
      run_localize(bundle, frame, unused, grid, cnn_cfg, lp, LocalizeMode::OracleEmbedding);
  CHECK_FALSE(r.pose.has_value());
  CHECK_FALSE(r.metrics.has_pose);
  CHECK(r.correspondence_count == 0);
}
