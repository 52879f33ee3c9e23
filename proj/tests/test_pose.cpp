#include <doctest.h>

#include <Eigen/Geometry>

#include "meshloc/common/rng.hpp"
#include "meshloc/pose/solver.hpp"
#include "meshloc/pose/spatial_hash.hpp"

using namespace meshloc;
using namespace meshloc::pose;
using scene::RigidTransform;

namespace {

RigidTransform random_pose(Rng& rng, double max_angle = 3.0, double max_shift = 2.0) {
  RigidTransform t;
  t.rotation = scene::rotation_zyx(rng.uniform(-max_angle, max_angle),
                                   rng.uniform(-max_angle, max_angle),
                                   rng.uniform(-max_angle, max_angle));
  t.translation << rng.uniform(-max_shift, max_shift), rng.uniform(-max_shift, max_shift),
      rng.uniform(-max_shift, max_shift);
  return t;
}

std::vector<Eigen::Vector3d> random_points(int n, Rng& rng, double extent = 2.0) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    pts.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                     rng.uniform(-extent, extent));
  return pts;
}

/// Quaternion-based angle between rotations, in degrees. The trace-formula
/// metric in pose_error cannot resolve angles below ~1e-6 degrees (acos near
/// 1 quantizes at sqrt(ulp)); recovery checks at the 1e-6-degree scale need
/// this sharper measurement of the same quantity.
double angular_deg(const RigidTransform& a, const RigidTransform& b) {
  return Eigen::Quaterniond(a.rotation).angularDistance(Eigen::Quaterniond(b.rotation)) * 180.0 /
         M_PI;
}

match::CorrespondenceSet make_pairs(const std::vector<Eigen::Vector3d>& world,
                                    const RigidTransform& pose) {
  match::CorrespondenceSet set;
  for (std::size_t i = 0; i < world.size(); ++i) {
    match::Correspondence c;
    c.vertex = static_cast<int>(i);
    c.world = world[i];
    c.camera = pose.apply(world[i]);
    c.is_static = true;
    set.pairs.push_back(c);
  }
  return set;
}

}  // namespace

TEST_CASE("kabsch_align: identity and pure translation") {
  Rng rng(3);
  const auto world = random_points(10, rng);
  {
    auto t = kabsch_align(world, world);
    REQUIRE(t.has_value());
    CHECK((t->rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(t->translation.norm() < 1e-12);
  }
  {
    std::vector<Eigen::Vector3d> shifted;  // world = camera + (1,2,3)
    for (const auto& p : world) shifted.push_back(p + Eigen::Vector3d(1, 2, 3));
    auto t = kabsch_align(world, shifted);
    REQUIRE(t.has_value());
    CHECK((t->rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(t->translation.isApprox(Eigen::Vector3d(-1, -2, -3)));
  }
}

TEST_CASE("kabsch_align: synthesis recovery, reflections corrected, degeneracy rejected") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform gt = random_pose(rng);
    const auto world = random_points(10, rng);
    std::vector<Eigen::Vector3d> camera;
    for (const auto& p : world) camera.push_back(gt.apply(p));
    auto t = kabsch_align(camera, world);
    REQUIRE(t.has_value());
    CHECK(angular_deg(*t, gt) < 1e-6);
    CHECK((t->camera_center() - gt.camera_center()).norm() < 1e-9);
    CHECK(t->is_rigid(1e-9));
  }
  // a mirrored correspondence still yields a proper rotation
  {
    const auto world = random_points(12, rng);
    std::vector<Eigen::Vector3d> mirrored;
    for (const auto& p : world) mirrored.emplace_back(-p.x(), p.y(), p.z());
    auto t = kabsch_align(mirrored, world);
    REQUIRE(t.has_value());
    CHECK(t->rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((t->rotation.transpose() * t->rotation - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-9);
  }
  // collinear points leave a free axis
  {
    std::vector<Eigen::Vector3d> line = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    CHECK_FALSE(kabsch_align(line, line).has_value());
  }
}

TEST_CASE("far_enough and rigid_check boundaries") {
  const double d = 0.25;
  const std::array<Eigen::Vector3d, 3> equilateral = {
      Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(2 * d, 0, 0),
      Eigen::Vector3d(d, 2 * d * std::sqrt(3.0) / 2.0, 0)};
  CHECK(far_enough(equilateral, d));
  const std::array<Eigen::Vector3d, 3> coincident = {
      Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0)};
  CHECK_FALSE(far_enough(coincident, d));
  const std::array<Eigen::Vector3d, 3> exact = {
      Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(d, 0, 0), Eigen::Vector3d(0, d, 0)};
  CHECK(far_enough(exact, d));  // >= rule: ties pass

  const std::array<Eigen::Vector3d, 3> world = {
      Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0)};
  CHECK(rigid_check(world, world, 0.05));
  std::array<Eigen::Vector3d, 3> displaced = world;
  displaced[0].x() += 0.5;  // 10x the tolerance
  CHECK_FALSE(rigid_check(world, displaced, 0.05));
  std::array<Eigen::Vector3d, 3> boundary = world;
  boundary[1].x() += 0.05;  // pair (0,1) distance off by exactly tol
  CHECK(rigid_check(world, boundary, 0.05 + 1e-12));
}

TEST_CASE("score_hypothesis: cap, hand value, static-only") {
  Rng rng(7);
  const RigidTransform gt = random_pose(rng);
  const auto world = random_points(6, rng);
  match::CorrespondenceSet pairs = make_pairs(world, gt);

  CHECK(score_hypothesis(gt, pairs, 1e-12) == doctest::Approx(1e12).epsilon(1e-6));

  match::CorrespondenceSet one;
  one.pairs.push_back(pairs.pairs[0]);
  one.pairs[0].camera += gt.rotation * Eigen::Vector3d(0.1, 0, 0);  // world-space residual 0.1
  CHECK(score_hypothesis(gt, one, 1e-12) == doctest::Approx(100.0).epsilon(1e-6));

  // dynamic pairs do not change the score
  match::CorrespondenceSet with_dynamic = one;
  match::Correspondence junk = pairs.pairs[1];
  junk.is_static = false;
  junk.world += Eigen::Vector3d(5, 5, 5);
  with_dynamic.pairs.push_back(junk);
  CHECK(score_hypothesis(gt, with_dynamic, 1e-12) ==
        doctest::Approx(score_hypothesis(gt, one, 1e-12)));

  match::CorrespondenceSet all_dynamic = pairs;
  for (auto& p : all_dynamic.pairs) p.is_static = false;
  CHECK(score_hypothesis(gt, all_dynamic, 1e-12) == 0.0);
}

TEST_CASE("ransac_pose: exact recovery, outlier robustness, degenerate input") {
  Rng rng(11);
  SolverConfig cfg;
  cfg.seed = 1234;

  SUBCASE("50 exact correspondences recover the pose to numerical precision") {
    for (int trial = 0; trial < 5; ++trial) {
      const RigidTransform gt = random_pose(rng);
      const auto world = random_points(50, rng);
      const auto pairs = make_pairs(world, gt);
      auto est = ransac_pose(pairs, world, cfg);
      REQUIRE(est.has_value());
      CHECK((est->camera_center() - gt.camera_center()).norm() < 1e-9);
      CHECK(angular_deg(*est, gt) < 1e-6);
    }
  }
  SUBCASE("50% gross outliers still localize") {
    const RigidTransform gt = random_pose(rng);
    auto world = random_points(50, rng);
    auto pairs = make_pairs(world, gt);
    for (int i = 0; i < 25; ++i)
      pairs.pairs[static_cast<std::size_t>(i)].world = random_points(1, rng)[0];
    // ICP refines against the full static scene geometry
    auto est = ransac_pose(pairs, world, cfg);
    REQUIRE(est.has_value());
    const auto [te, re] = pose_error(*est, gt);
    CHECK(te < 0.005);
    CHECK(re < 0.5);
  }
  SUBCASE("two correspondences are underdetermined") {
    const RigidTransform gt = random_pose(rng);
    const auto world = random_points(2, rng);
    CHECK_FALSE(ransac_pose(make_pairs(world, gt), world, cfg).has_value());
  }
  SUBCASE("fixed seed reproduces the pose bit-for-bit") {
    const RigidTransform gt = random_pose(rng);
    auto world = random_points(30, rng);
    auto pairs = make_pairs(world, gt);
    for (int i = 0; i < 10; ++i)
      pairs.pairs[static_cast<std::size_t>(i)].world = random_points(1, rng)[0];
    auto a = ransac_pose(pairs, world, cfg);
    auto b = ransac_pose(pairs, world, cfg);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK((a->rotation - b->rotation).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a->translation - b->translation).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("icp_refine: fixed point, improvement, monotone objective") {
  Rng rng(13);
  SolverConfig cfg;
  const auto world = random_points(200, rng);
  const RigidTransform gt = random_pose(rng);
  std::vector<Eigen::Vector3d> cloud;
  for (const auto& p : world) cloud.push_back(gt.apply(p));

  SUBCASE("exact start stays put") {
    const IcpResult r = icp_refine(gt, cloud, world, cfg);
    CHECK(r.matched);
    CHECK((r.transform.rotation - gt.rotation).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((r.transform.translation - gt.translation).norm() < 1e-9);
  }
  SUBCASE("perturbed start strictly improves and never regresses") {
    RigidTransform perturbed = gt;
    perturbed.rotation =
        gt.rotation * scene::rotation_zyx(0.02, 0.0, 0.025);  // about 2 degrees
    perturbed.translation += Eigen::Vector3d(0.02, -0.01, 0.005);
    const IcpResult r = icp_refine(perturbed, cloud, world, cfg);
    CHECK(r.matched);
    CHECK(r.final_objective < r.initial_objective);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
    const auto [te0, re0] = pose_error(perturbed, gt);
    const auto [te1, re1] = pose_error(r.transform, gt);
    CHECK(te1 < te0);
    CHECK(re1 < re0);
  }
  SUBCASE("nothing inside the gate returns the start flagged") {
    RigidTransform far = gt;
    far.translation += Eigen::Vector3d(100, 100, 100);
    const IcpResult r = icp_refine(far, cloud, world, cfg);
    CHECK_FALSE(r.matched);
    CHECK((r.transform.translation - far.translation).norm() == 0.0);
  }
}

TEST_CASE("spatial hash agrees with exhaustive nearest-neighbor search") {
  Rng rng(17);
  const auto pts = random_points(500, rng, 3.0);
  const double gate = 0.4;
  const SpatialHashGrid grid(pts, gate);
  for (int q = 0; q < 200; ++q) {
    const Eigen::Vector3d query(rng.uniform(-3.5, 3.5), rng.uniform(-3.5, 3.5),
                                rng.uniform(-3.5, 3.5));
    int best = -1;
    double best_d = gate * gate;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double d = (pts[i] - query).squaredNorm();
      if (d < best_d || (d == best_d && best != -1 && static_cast<int>(i) < best)) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    CHECK(grid.nearest(query, gate) == best);
  }
}

TEST_CASE("pose_error: trivial cases and the quaternion oracle") {
  RigidTransform id;
  {
    const auto [te, re] = pose_error(id, id);
    CHECK(te == 0.0);
    CHECK(re == 0.0);
  }
  {
    RigidTransform rot;  // 10 degrees about z, same center: t stays zero
    rot.rotation = Eigen::AngleAxisd(10.0 * M_PI / 180.0, Eigen::Vector3d::UnitZ()).matrix();
    const auto [te, re] = pose_error(rot, id);
    CHECK(te == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(re == doctest::Approx(10.0).epsilon(1e-9));
  }
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform a = random_pose(rng);
    const RigidTransform b = random_pose(rng);
    const auto [te, re] = pose_error(a, b);
    const Eigen::Quaterniond qa(a.rotation), qb(b.rotation);
    const double oracle = qa.angularDistance(qb) * 180.0 / M_PI;
    CHECK(std::abs(re - oracle) < 1e-9);
    CHECK(te == doctest::Approx((a.camera_center() - b.camera_center()).norm()));
  }
}

TEST_CASE("dcre_of_frame") {
  scene::PinholeCamera cam{300.0, 300.0, 256.0, 144.0, 512, 288};
  RigidTransform gt;

  SUBCASE("identical poses give zero") {
    scene::Image depth = scene::Image::zeros(512, 288, 1);
    for (double& d : depth.data) d = 2.0;
    auto dcre = dcre_of_frame(depth, cam, gt, gt);
    REQUIRE(dcre.has_value());
    CHECK(*dcre < 1e-12);
  }
  SUBCASE("all-invalid depth is undefined") {
    scene::Image depth = scene::Image::zeros(512, 288, 1);
    CHECK_FALSE(dcre_of_frame(depth, cam, gt, gt).has_value());
  }
  SUBCASE("single-pixel hand-computed displacement") {
    scene::Image depth = scene::Image::zeros(512, 288, 1);
    depth.at(0, 100, 200) = 2.0;
    // an x-shift of the camera moves the reprojection by fx*dx/z pixels
    const double want_px = 29.36;
    RigidTransform est;
    est.translation << want_px * 2.0 / 300.0, 0.0, 0.0;
    auto dcre = dcre_of_frame(depth, cam, est, gt);
    REQUIRE(dcre.has_value());
    const double diagonal = std::hypot(512.0, 288.0);
    CHECK(*dcre == doctest::Approx(want_px / diagonal).epsilon(1e-12));
    CHECK(*dcre == doctest::Approx(0.050).epsilon(2e-3));
  }
}

TEST_CASE("aggregate_metrics reproduces the published score arithmetic") {
  auto synth = [](int n, double dcre005_frac, double outlier_frac) {
    std::vector<FrameMetrics> frames;
    const int good = static_cast<int>(std::llround(dcre005_frac * n));
    const int bad = static_cast<int>(std::llround(outlier_frac * n));
    for (int i = 0; i < n; ++i) {
      FrameMetrics f;
      f.has_pose = true;
      f.dcre_valid = true;
      f.dcre = i < good ? 0.01 : (i < good + bad ? 0.7 : 0.3);
      f.translation_error = 1.0;
      f.rotation_error_deg = 90.0;
      frames.push_back(f);
    }
    return frames;
  };
  {
    const auto frames = synth(1000, 0.533, 0.132);
    const auto record = aggregate_metrics(frames);
    CHECK(std::abs(record.dcre_005 - 0.533) < 1e-12);
    CHECK(std::abs(record.outlier_05 - 0.132) < 1e-12);
    CHECK(std::abs(record.score - 1.401) < 1e-12);
  }
  {
    const auto record = aggregate_metrics(synth(1000, 0.538, 0.097));
    CHECK(std::abs(record.score - 1.441) < 1e-12);
  }
  {
    const auto record = aggregate_metrics(synth(1000, 0.416, 0.254));
    CHECK(std::abs(record.score - 1.162) < 1e-12);
  }
  SUBCASE("perfect run") {
    std::vector<FrameMetrics> frames(64);
    for (auto& f : frames) {
      f.has_pose = true;
      f.dcre_valid = true;
      f.dcre = 0.0;
      f.translation_error = 0.0;
      f.rotation_error_deg = 0.0;
    }
    const auto record = aggregate_metrics(frames);
    CHECK(record.pose_005_5deg == 1.0);
    CHECK(record.dcre_005 == 1.0);
    CHECK(record.outlier_05 == 0.0);
    CHECK(record.nan_rate == 0.0);
    CHECK(record.score == 2.0);
  }
  SUBCASE("empty list gives the flagged all-zero record") {
    const auto record = aggregate_metrics(std::vector<FrameMetrics>{});
    CHECK(record.frame_count == 0);
    CHECK(record.score == 0.0);
  }
  SUBCASE("score identity holds") {
    Rng rng(23);
    std::vector<FrameMetrics> frames;
    for (int i = 0; i < 333; ++i) {
      FrameMetrics f;
      f.has_pose = rng.uniform() > 0.2;
      f.dcre_valid = f.has_pose;
      f.dcre = rng.uniform(0.0, 1.0);
      frames.push_back(f);
    }
    const auto record = aggregate_metrics(frames);
    CHECK(std::abs(record.score - 1.0 - record.dcre_005 + record.outlier_05) < 1e-12);
  }
}
