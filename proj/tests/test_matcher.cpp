#include <doctest.h>

#include "meshloc/common/rng.hpp"
#include "meshloc/match/matcher.hpp"
#include "meshloc/match/oracle.hpp"

using namespace meshloc;
using namespace meshloc::match;
using num::ParamSet;
using num::Tensor;

namespace {

// four-level grid on a 64x36 probe frame keeps routing tests quick
const std::vector<int> kSplit = {16, 8, 8, 8};

img::GridHierarchy probe_grid() { return img::GridHierarchy::build(64, 36, 4); }

train::GroundTruth random_gt(const img::GridHierarchy& grid, int vertices, double visible_frac,
                             Rng& rng) {
  train::GroundTruth gt;
  gt.level_count = grid.level_count();
  gt.vertices.resize(static_cast<std::size_t>(vertices));
  for (auto& rec : gt.vertices) {
    if (rng.uniform() > visible_frac) continue;
    rec.visible = true;
    const double u = rng.uniform(0.0, grid.width());
    const double v = rng.uniform(0.0, grid.height());
    rec.cells.resize(static_cast<std::size_t>(grid.level_count()));
    for (int l = 0; l < grid.level_count(); ++l)
      rec.cells[static_cast<std::size_t>(l)] = grid.locate_cell(l, u, v);
    const int last = grid.level_count() - 1;
    const auto [ox, oy] = grid.cell_origin(last, rec.cells[static_cast<std::size_t>(last)]);
    rec.offset = {(u - ox) / grid.level(last).cell_w, (v - oy) / grid.level(last).cell_h};
  }
  return gt;
}

}  // namespace

TEST_CASE("confidence_of: trivial values and the direct-formula oracle") {
  Rng rng(3);
  const int w = 6;
  Eigen::VectorXd f(w), e(w), W(w);
  for (int i = 0; i < w; ++i) {
    f[i] = rng.uniform(-1, 1);
    e[i] = rng.uniform(-1, 1);
    W[i] = rng.uniform(-1, 1);
  }

  CHECK(confidence_of(f, e, Eigen::VectorXd::Zero(w), 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(confidence_of(f, f, W, -10.0) == doctest::Approx(4.5398e-05).epsilon(1e-3));

  const double direct = 1.0 / (1.0 + std::exp(-(W.dot((f - e).cwiseAbs()) + 0.7)));
  CHECK(std::abs(confidence_of(f, e, W, 0.7) - direct) < 1e-12);

  Eigen::VectorXd short_e(w - 1);
  CHECK_THROWS_AS(confidence_of(f, short_e, W, 0.0), std::invalid_argument);
}

TEST_CASE("predict_offset: zero logits, range, width checks") {
  Rng rng(5);
  const int w = 8;
  Eigen::VectorXd f(w), e(w);
  for (int i = 0; i < w; ++i) {
    f[i] = rng.uniform(-3, 3);
    e[i] = rng.uniform(-3, 3);
  }
  const Eigen::Vector2d centered = predict_offset(f, e, Eigen::MatrixXd::Zero(2, 2 * w),
                                                  Eigen::Vector2d::Zero());
  CHECK(centered.x() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(centered.y() == doctest::Approx(0.5).epsilon(1e-15));

  Eigen::MatrixXd W = Eigen::MatrixXd::Random(2, 2 * w) * 5.0;
  const Eigen::Vector2d p = predict_offset(f, e, W, {0.3, -0.4});
  CHECK(p.x() > 0.0);
  CHECK(p.x() < 1.0);
  CHECK(p.y() > 0.0);
  CHECK(p.y() < 1.0);

  CHECK_THROWS_AS(predict_offset(f, e, Eigen::MatrixXd::Zero(2, w), Eigen::Vector2d::Zero()),
                  std::invalid_argument);
}

TEST_CASE("route_vertices: oracle embeddings route every visible vertex to its cell") {
  img::GridHierarchy grid = probe_grid();
  Rng rng(7);
  train::GroundTruth gt = random_gt(grid, 60, 0.7, rng);
  OracleEmbeddings oracle = build_oracle_embeddings(grid, kSplit, gt, 11);
  ParamSet params;
  init_oracle_match_params(kSplit, params);

  MatchConfig cfg;
  cfg.beams = {1, 3, 3};
  RouteState routes = route_vertices(oracle.descriptors, oracle.cells, grid, params, cfg);

  const int last = grid.level_count() - 1;
  int visible = 0, routed = 0, hits = 0;
  for (std::size_t v = 0; v < gt.vertices.size(); ++v) {
    const auto& rec = gt.vertices[v];
    const auto& route = routes.vertices[v];
    if (!rec.visible) {
      CHECK_FALSE(route.alive);  // level-0 gate must reject it
      continue;
    }
    ++visible;
    if (!route.alive) continue;
    ++routed;
    for (const auto& cand : route.levels[static_cast<std::size_t>(last)])
      if (cand.cell == rec.cells[static_cast<std::size_t>(last)]) {
        ++hits;
        break;
      }
    // saturated confidences on the true path
    CHECK(route.levels[0][0].confidence > 0.9);
  }
  REQUIRE(visible > 10);
  CHECK(routed == visible);
  CHECK(hits == visible);  // 100% routing accuracy
}

TEST_CASE("route_vertices: candidates always descend from surviving parents") {
  img::GridHierarchy grid = probe_grid();
  Rng rng(13);
  train::GroundTruth gt = random_gt(grid, 40, 0.8, rng);
  OracleEmbeddings oracle = build_oracle_embeddings(grid, kSplit, gt, 17);
  // learned-ish params: random heads, threshold 0 so nothing is filtered
  ParamSet params;
  Rng prng(19);
  init_match_params(kSplit, params, prng);
  MatchConfig cfg;
  cfg.beams = {2, 3, 4};
  cfg.confidence_threshold = 0.0;
  RouteState routes = route_vertices(oracle.descriptors, oracle.cells, grid, params, cfg);

  for (const auto& route : routes.vertices) {
    if (route.levels.empty()) continue;
    for (int l = 1; l < static_cast<int>(route.levels.size()); ++l) {
      for (const auto& cand : route.levels[static_cast<std::size_t>(l)]) {
        bool parent_found = false;
        for (const auto& parent : route.levels[static_cast<std::size_t>(l - 1)])
          parent_found = parent_found || grid.parent_of(l, cand.cell) == parent.cell;
        CHECK(parent_found);
      }
    }
  }
}

TEST_CASE("route_vertices: beams of one equal the greedy per-level argmin") {
  img::GridHierarchy grid = probe_grid();
  Rng rng(23);
  train::GroundTruth gt = random_gt(grid, 30, 1.0, rng);
  OracleEmbeddings oracle = build_oracle_embeddings(grid, kSplit, gt, 29);
  ParamSet params;
  init_oracle_match_params(kSplit, params);
  MatchConfig cfg;
  cfg.beams = {1, 1, 1};
  cfg.confidence_threshold = 0.0;
  RouteState routes = route_vertices(oracle.descriptors, oracle.cells, grid, params, cfg);

  for (std::size_t v = 0; v < gt.vertices.size(); ++v) {
    if (!gt.vertices[v].visible || !routes.vertices[v].alive) continue;
    // greedy reference: argmin distance among children of the previous pick
    int current = 0;
    for (int l = 1; l < grid.level_count(); ++l) {
      const auto e = oracle.descriptors.level(l).row(static_cast<Eigen::Index>(v));
      double best = std::numeric_limits<double>::max();
      int best_cell = -1;
      for (int child : grid.children_of(l - 1, current)) {
        const double d = (oracle.cells.level(l).row(child) - e).norm();
        if (d < best) {
          best = d;
          best_cell = child;
        }
      }
      current = best_cell;
      REQUIRE(routes.vertices[v].levels[static_cast<std::size_t>(l)].size() == 1);
      CHECK(routes.vertices[v].levels[static_cast<std::size_t>(l)][0].cell == current);
    }
  }
}

TEST_CASE("route_vertices: shrinking one level's beam never adds candidates there") {
  // Nesting is per decision level: with the earlier beams fixed, the level's
  // candidate pool is identical, so a narrower cut keeps a prefix of the
  // wider one. (Growing an EARLIER beam changes the pool itself, so global
  // set nesting cannot hold for any top-k router.)
  img::GridHierarchy grid = probe_grid();
  Rng rng(31);
  train::GroundTruth gt = random_gt(grid, 30, 1.0, rng);
  OracleEmbeddings oracle = build_oracle_embeddings(grid, kSplit, gt, 37);
  ParamSet params;
  Rng prng(41);
  init_match_params(kSplit, params, prng);

  for (std::size_t shrink_level = 0; shrink_level < 3; ++shrink_level) {
    MatchConfig narrow, wide;
    wide.beams = {2, 3, 4};
    narrow.beams = wide.beams;
    narrow.beams[shrink_level] = std::max(1, wide.beams[shrink_level] - 2);
    narrow.confidence_threshold = wide.confidence_threshold = 0.0;
    RouteState rn = route_vertices(oracle.descriptors, oracle.cells, grid, params, narrow);
    RouteState rw = route_vertices(oracle.descriptors, oracle.cells, grid, params, wide);

    const std::size_t l = shrink_level + 1;  // decision level in the hierarchy
    for (std::size_t v = 0; v < rn.vertices.size(); ++v) {
      if (rn.vertices[v].levels.empty() || rw.vertices[v].levels.empty()) continue;
      if (rn.vertices[v].levels.size() <= l || rw.vertices[v].levels.size() <= l) continue;
      for (const auto& cand : rn.vertices[v].levels[l]) {
        bool found = false;
        for (const auto& wider : rw.vertices[v].levels[l]) found = found || wider.cell == cand.cell;
        CHECK(found);
      }
    }
  }
}

TEST_CASE("extract_correspondences: offsets map to pixels, invalid depth drops pairs") {
  img::GridHierarchy grid = probe_grid();
  const int last = grid.level_count() - 1;
  // one vertex routed to cell 0 at the finest level
  RouteState routes;
  routes.level_count = grid.level_count();
  routes.vertices.resize(1);
  routes.vertices[0].alive = true;
  routes.vertices[0].levels.resize(static_cast<std::size_t>(grid.level_count()));
  routes.vertices[0].levels[static_cast<std::size_t>(last)].push_back({0, 0.0, 0.97});

  train::GroundTruth gt;
  gt.level_count = grid.level_count();
  gt.vertices.resize(1);
  OracleEmbeddings oracle = build_oracle_embeddings(grid, kSplit, gt, 43);
  ParamSet params;
  init_oracle_match_params(kSplit, params);  // zero offset head: predicts (0.5, 0.5)

  scene::PinholeCamera cam{100.0, 100.0, 32.0, 18.0, 64, 36};
  Eigen::MatrixX3d world(1, 3);
  world.row(0) << 1.0, 2.0, 3.0;
  std::vector<std::uint8_t> statics = {1};

  SUBCASE("valid depth gives one pair at the cell-center pixel") {
    scene::Image depth = scene::Image::zeros(64, 36, 1);
    depth.at(0, 4, 4) = 2.0;  // the 8x9 cell 0 centers at pixel (4, 4.5)
    CorrespondenceSet set = extract_correspondences(routes, oracle.descriptors, oracle.cells, grid,
                                                    depth, cam, world, statics, params);
    REQUIRE(set.pairs.size() == 1);
    CHECK(set.pairs[0].u == doctest::Approx(4.0));
    CHECK(set.pairs[0].v == doctest::Approx(4.5));
    CHECK(set.pairs[0].depth == doctest::Approx(2.0));
    CHECK(set.pairs[0].world.isApprox(Eigen::Vector3d(1, 2, 3)));
    CHECK(set.pairs[0].camera.isApprox(
        scene::backproject_pixel(cam, 4.0, 4.5, 2.0)));
    CHECK(set.pairs[0].is_static);
    CHECK(set.pairs[0].confidence == doctest::Approx(0.97));
  }
  SUBCASE("zero depth at the target pixel drops the pair") {
    scene::Image depth = scene::Image::zeros(64, 36, 1);
    CorrespondenceSet set = extract_correspondences(routes, oracle.descriptors, oracle.cells, grid,
                                                    depth, cam, world, statics, params);
    CHECK(set.pairs.empty());
  }
}

TEST_CASE("extract_correspondences: at most beam-final pairs per vertex") {
  img::GridHierarchy grid = probe_grid();
  Rng rng(47);
  train::GroundTruth gt = random_gt(grid, 50, 0.9, rng);
  OracleEmbeddings oracle = build_oracle_embeddings(grid, kSplit, gt, 53);
  ParamSet params;
  init_oracle_match_params(kSplit, params);
  MatchConfig cfg;
  cfg.beams = {1, 3, 4};
  RouteState routes = route_vertices(oracle.descriptors, oracle.cells, grid, params, cfg);

  scene::Image depth = scene::Image::zeros(64, 36, 1);
  for (double& d : depth.data) d = 2.5;
  scene::PinholeCamera cam{100.0, 100.0, 32.0, 18.0, 64, 36};
  Eigen::MatrixX3d world = Eigen::MatrixX3d::Random(50, 3);
  std::vector<std::uint8_t> statics(50, 1);
  CorrespondenceSet set = extract_correspondences(routes, oracle.descriptors, oracle.cells, grid,
                                                  depth, cam, world, statics, params);
  CHECK(static_cast<int>(set.pairs.size()) <= 4 * routes.survivor_count());
  CHECK(!set.pairs.empty());
}
