#include <doctest.h>

#include <cstring>

#include "meshloc/common/rng.hpp"
#include "meshloc/img/cnn.hpp"
#include "meshloc/num/gradcheck.hpp"

using namespace meshloc;
using namespace meshloc::img;
using num::ParamSet;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

Tensor random_rgbd(int h, int w, Rng& rng) {
  Tensor t({4, h, w});
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(0.0, 1.0);
  return t;
}

CnnConfig shape_probe_config() {
  CnnConfig cfg;
  cfg.initial_filters = 2;
  cfg.set_reps = {0, 0, 0, 0, 0, 0};
  return cfg;
}

}  // namespace

TEST_CASE("embed_image: per-level shapes match the grid and the subvector split") {
  GridHierarchy grid = GridHierarchy::build();
  CnnConfig cfg = shape_probe_config();
  ParamSet params;
  Rng init(1);
  init_cnn_params(cfg, params, init);
  Rng rng(2);
  CellEmbeddingSet set = embed_image(random_rgbd(288, 512, rng), grid, cfg, params);

  REQUIRE(set.level_count() == 7);
  const int counts[7] = {1, 2, 8, 32, 128, 512, 2048};
  const int widths[7] = {256, 128, 128, 64, 64, 64, 64};
  for (int l = 0; l < 7; ++l) {
    CHECK(set.level(l).rows() == counts[l]);
    CHECK(set.level(l).cols() == widths[l]);
  }
}

TEST_CASE("embed_image: head cell counts track the grid for other configs") {
  GridHierarchy grid = GridHierarchy::build(64, 36, 4);
  CnnConfig cfg;
  cfg.initial_filters = 2;
  cfg.set_reps = {0, 1, 0};
  cfg.head_widths = {16, 8, 8, 8};
  ParamSet params;
  Rng init(3);
  init_cnn_params(cfg, params, init);
  Rng rng(4);
  CellEmbeddingSet set = embed_image(random_rgbd(36, 64, rng), grid, cfg, params);
  REQUIRE(set.level_count() == 4);
  for (int l = 0; l < 4; ++l) {
    CHECK(set.level(l).rows() == grid.cell_count(l));
    CHECK(set.level(l).cols() == cfg.head_widths[static_cast<std::size_t>(l)]);
  }
}

TEST_CASE("embed_image: inference is deterministic bit-for-bit") {
  GridHierarchy grid = GridHierarchy::build(64, 36, 4);
  CnnConfig cfg;
  cfg.initial_filters = 4;
  cfg.set_reps = {1, 0, 0};
  cfg.head_widths = {16, 8, 8, 8};
  ParamSet params;
  Rng init(5);
  init_cnn_params(cfg, params, init);
  Rng rng(6);
  Tensor frame = random_rgbd(36, 64, rng);

  CellEmbeddingSet a = embed_image(frame, grid, cfg, params);
  CellEmbeddingSet b = embed_image(frame, grid, cfg, params);
  for (int l = 0; l < 4; ++l)
    CHECK(std::memcmp(a.level(l).data(), b.level(l).data(),
                      sizeof(double) * static_cast<std::size_t>(a.level(l).size())) == 0);
}

TEST_CASE("batch-norm running statistics drive inference mode") {
  GridHierarchy grid = GridHierarchy::build(32, 18, 3);
  CnnConfig cfg;
  cfg.initial_filters = 2;
  cfg.set_reps = {0, 0};
  cfg.head_widths = {8, 4, 4};
  ParamSet params;
  Rng init(7);
  init_cnn_params(cfg, params, init);
  Rng rng(8);
  Tensor frame = random_rgbd(18, 32, rng);

  // training-style pass updates the running buffers
  const Tensor before = params.at("cnn.stem.bn.mean");
  {
    Tape tape;
    embed_image_t(tape, params, frame, grid, cfg, /*use_batch_stats=*/true, /*update_running=*/true);
  }
  const Tensor after = params.at("cnn.stem.bn.mean");
  CHECK((before.array() != after.array()).any());

  // inference passes neither mutate the stats nor disagree with each other
  CellEmbeddingSet a = embed_image(frame, grid, cfg, params);
  CHECK((params.at("cnn.stem.bn.mean").array() == after.array()).all());
  CellEmbeddingSet b = embed_image(frame, grid, cfg, params);
  for (int l = 0; l < 3; ++l) CHECK((a.level(l).array() == b.level(l).array()).all());
}

TEST_CASE("embed_image: wrong input shape rejected") {
  GridHierarchy grid = GridHierarchy::build(32, 18, 3);
  CnnConfig cfg;
  cfg.initial_filters = 2;
  cfg.set_reps = {0, 0};
  cfg.head_widths = {8, 4, 4};
  ParamSet params;
  Rng init(9);
  init_cnn_params(cfg, params, init);
  Tape tape;
  Tensor bad({3, 18, 32});
  CHECK_THROWS_AS(embed_image_t(tape, params, bad, grid, cfg, false, false),
                  std::invalid_argument);
}

TEST_CASE("embed_image: tiny-config gradients match finite differences") {
  GridHierarchy grid = GridHierarchy::build(64, 36, 4);
  CnnConfig cfg;
  cfg.initial_filters = 8;
  cfg.set_reps = {1, 1, 1};
  cfg.head_widths = {16, 8, 8, 8};
  ParamSet params;
  Rng init(10);
  init_cnn_params(cfg, params, init);
  Rng rng(11);
  Tensor frame = random_rgbd(36, 64, rng);

  auto build = [&](Tape& t, ParamSet& p) {
    auto levels = embed_image_t(t, p, frame, grid, cfg, /*use_batch_stats=*/true,
                                /*update_running=*/false);
    Var acc = num::mean(num::square(levels[0]));
    for (std::size_t l = 1; l < levels.size(); ++l)
      acc = num::add(acc, num::mean(num::square(levels[l])));
    return acc;
  };
  auto report = num::finite_difference_check<double>(params, build, 1e-6, 100, 13);
  CHECK(report.coords_checked == 100);
  CHECK(report.max_rel_err < 1e-4);
}
