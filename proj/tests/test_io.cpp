#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "meshloc/common/rng.hpp"
#include "meshloc/io/descriptor_cache.hpp"
#include "meshloc/io/image_io.hpp"
#include "meshloc/io/pipeline_config.hpp"
#include "meshloc/io/pose_io.hpp"
#include "meshloc/io/report.hpp"
#include "meshloc/io/scene_io.hpp"

using namespace meshloc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "meshloc_io_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("PPM/PGM round trips preserve quantized samples") {
  Rng rng(3);
  scene::Image rgb = scene::Image::zeros(17, 9, 3);
  for (double& p : rgb.data) p = rng.uniform(0.0, 1.0);
  const auto ppm = (temp_dir() / "img.ppm").string();
  io::write_ppm(ppm, rgb);
  scene::Image rgb2 = io::read_ppm(ppm);
  REQUIRE(rgb2.width == 17);
  REQUIRE(rgb2.height == 9);
  for (std::size_t i = 0; i < rgb.data.size(); ++i)
    CHECK(std::abs(rgb.data[i] - rgb2.data[i]) <= 0.5 / 255.0 + 1e-12);

  scene::Image depth = scene::Image::zeros(13, 7, 1);
  for (double& p : depth.data) p = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.1, 8.0);
  const auto pgm = (temp_dir() / "img.pgm").string();
  io::write_pgm16(pgm, depth, 0.001);
  scene::Image depth2 = io::read_pgm16(pgm, 0.001);
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    CHECK(std::abs(depth.data[i] - depth2.data[i]) <= 0.0005 + 1e-12);
    if (depth.data[i] == 0.0) CHECK(depth2.data[i] == 0.0);  // invalid marker survives
  }
}

TEST_CASE("pose files round trip") {
  Rng rng(5);
  std::vector<scene::RigidTransform> poses;
  for (int k = 0; k < 4; ++k) {
    scene::RigidTransform t;
    t.rotation = scene::rotation_zyx(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-3, 3));
    t.translation << rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2);
    poses.push_back(t);
  }
  const auto blocks = (temp_dir() / "gt.txt").string();
  io::write_pose_blocks(blocks, poses);
  const auto loaded = io::read_pose_blocks(blocks);
  REQUIRE(loaded.size() == 4);
  for (std::size_t k = 0; k < 4; ++k)
    CHECK((loaded[k].matrix() - poses[k].matrix()).cwiseAbs().maxCoeff() == 0.0);

  std::vector<io::PoseEstimate> estimates = {{0, poses[0]}, {1, std::nullopt}, {2, poses[2]}};
  const auto est_path = (temp_dir() / "est.txt").string();
  io::write_pose_estimates(est_path, estimates);
  const auto est = io::read_pose_estimates(est_path);
  REQUIRE(est.size() == 3);
  CHECK(est[0].pose.has_value());
  CHECK_FALSE(est[1].pose.has_value());
  CHECK((est[2].pose->matrix() - poses[2].matrix()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("descriptor cache verifies its keys") {
  Rng rng(7);
  Eigen::MatrixXd d = Eigen::MatrixXd::Random(11, 24);
  const auto path = (temp_dir() / "desc.cache").string();
  io::write_descriptor_cache(path, 111, 222, d);
  const Eigen::MatrixXd loaded = io::read_descriptor_cache(path, 111, 222);
  CHECK((loaded.array() == d.array()).all());
  CHECK_THROWS_AS(io::read_descriptor_cache(path, 112, 222), DataError);  // other mesh
  CHECK_THROWS_AS(io::read_descriptor_cache(path, 111, 223), DataError);  // other checkpoint
}

TEST_CASE("pipeline config: defaults hold the published constants") {
  io::PipelineConfig cfg;
  cfg.validate();
  CHECK(cfg.gnn.split == std::vector<int>{256, 128, 128, 64, 64, 64, 64});
  CHECK(cfg.gnn.blocks.size() == 7);
  CHECK(cfg.routing.beams == std::vector<int>{1, 3, 3, 3, 4, 4});
  CHECK(cfg.train.weights.lambda_s == 2.0);
  CHECK(cfg.train.weights.lambda_o == 15.0);
  CHECK(cfg.train.weights.lambda_n == 0.2);
  CHECK(cfg.solver.iterations == 1024);
  CHECK(cfg.cnn.initial_filters == 32);
}

TEST_CASE("pipeline config: file round trip, unknown keys rejected") {
  const auto path = (temp_dir() / "config.json").string();
  io::PipelineConfig cfg;
  cfg.cnn.initial_filters = 8;
  cfg.train.seed = 99;
  io::write_pipeline_config(path, cfg);
  const io::PipelineConfig loaded = io::load_pipeline_config(path);
  CHECK(loaded.cnn.initial_filters == 8);
  CHECK(loaded.train.seed == 99);
  CHECK(loaded.gnn.split == cfg.gnn.split);

  {
    std::ofstream os(path);
    os << R"({"cnn": {"initial_filter": 8}})";  // typo
  }
  CHECK_THROWS_AS(io::load_pipeline_config(path), ConfigError);
  {
    std::ofstream os(path);
    os << R"({"gnn": {"split": [256,128,128,64,64,64,64]}, "cnn": {"head_widths": [1,2,3]}})";
  }
  CHECK_THROWS_AS(io::load_pipeline_config(path), ConfigError);  // split/head mismatch
  {
    std::ofstream os(path);
    os << "not json";
  }
  CHECK_THROWS_AS(io::load_pipeline_config(path), ConfigError);
}

TEST_CASE("metrics report round trip") {
  pose::BenchmarkRecord record;
  record.score = 1.401;
  record.dcre_005 = 0.533;
  record.dcre_015 = 0.579;
  record.pose_005_5deg = 0.506;
  record.outlier_05 = 0.132;
  record.nan_rate = 0.196;
  const auto path = (temp_dir() / "metrics.tsv").string();
  io::write_metrics_report(path, {{"meshloc", record}});
  const auto rows = io::read_metrics_report(path);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].method == "meshloc");
  CHECK(rows[0].record.score == doctest::Approx(1.401));
  CHECK(rows[0].record.nan_rate == doctest::Approx(0.196));
}

TEST_CASE("scene metadata round trip") {
  io::SceneMeta meta;
  meta.seed = 42;
  meta.intrinsics = {320.0, 320.0, 256.0, 144.0, 512, 288};
  meta.depth_scale = 0.001;
  meta.palette = {{"wall", {0.1, 0.2, 0.3}, false}, {"movable_0", {0.9, 0.1, 0.1}, true}};
  meta.frames = {{0, 0, "frames/a.ppm", "frames/a.pgm"}, {1, 1, "frames/b.ppm", "frames/b.pgm"}};
  const auto path = (temp_dir() / "scene.json").string();
  io::write_scene_meta(path, meta);
  const io::SceneMeta loaded = io::read_scene_meta(path);
  CHECK(loaded.seed == 42);
  CHECK(loaded.intrinsics.fx == 320.0);
  REQUIRE(loaded.palette.size() == 2);
  CHECK(loaded.palette[1].dynamic);
  REQUIRE(loaded.frames.size() == 2);
  CHECK(loaded.frames[1].config == 1);
}

TEST_CASE("image resize") {
  scene::Image rgb = scene::Image::zeros(8, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) rgb.at(0, y, x) = x / 7.0;
  scene::Image up = io::resize_bilinear(rgb, 16, 8);
  CHECK(up.width == 16);
  // monotone gradient stays monotone
  for (int x = 1; x < 16; ++x) CHECK(up.at(0, 4, x) >= up.at(0, 4, x - 1) - 1e-12);

  scene::Image depth = scene::Image::zeros(8, 4, 1);
  depth.at(0, 1, 3) = 2.5;
  scene::Image down = io::resize_nearest(depth, 4, 2);
  // nearest never invents depth values
  for (double d : down.data) CHECK((d == 0.0 || d == 2.5));
}
