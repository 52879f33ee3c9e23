#include <doctest.h>

#include "meshloc/common/errors.hpp"
#include "meshloc/common/rng.hpp"
#include "meshloc/img/grid.hpp"

using namespace meshloc;
using namespace meshloc::img;

TEST_CASE("grid hierarchy: cell counts and cell geometry") {
  GridHierarchy g = GridHierarchy::build();
  REQUIRE(g.level_count() == 7);
  const int expected[7] = {1, 2, 8, 32, 128, 512, 2048};
  for (int l = 0; l < 7; ++l) CHECK(g.cell_count(l) == expected[l]);
  CHECK(g.level(6).cell_w == 8);
  CHECK(g.level(6).cell_h == 9);
  CHECK(g.level(1).cols == 2);
  CHECK(g.level(1).rows == 1);
}

TEST_CASE("grid hierarchy: indivisible dimensions rejected") {
  CHECK_THROWS_AS(GridHierarchy::build(500, 288, 7), ConfigError);
  CHECK_THROWS_AS(GridHierarchy::build(512, 300, 7), ConfigError);
  CHECK_NOTHROW(GridHierarchy::build(64, 36, 4));
}

TEST_CASE("locate_cell corners and bounds") {
  GridHierarchy g = GridHierarchy::build();
  for (int l = 0; l < 7; ++l) CHECK(g.locate_cell(l, 0, 0) == 0);
  const int cell = g.locate_cell(6, 511, 287);
  CHECK(g.cell_col(6, cell) == 63);
  CHECK(g.cell_row(6, cell) == 31);
  CHECK(cell == g.cell_count(6) - 1);
  CHECK_THROWS_AS(g.locate_cell(3, 512, 0), DataError);
  CHECK_THROWS_AS(g.locate_cell(3, 0, -0.5), DataError);
}

TEST_CASE("parent consistency on random pixels") {
  GridHierarchy g = GridHierarchy::build();
  Rng rng(4242);
  for (int k = 0; k < 1000; ++k) {
    const double u = rng.uniform(0.0, 512.0);
    const double v = rng.uniform(0.0, 288.0);
    for (int l = 1; l < 7; ++l) {
      const int parent = g.locate_cell(l - 1, u, v);
      const int child = g.locate_cell(l, u, v);
      CHECK(g.parent_of(l, child) == parent);
    }
  }
}

TEST_CASE("children exactly tile their parent") {
  GridHierarchy g = GridHierarchy::build();
  Rng rng(99);
  for (int l = 0; l < 6; ++l) {
    const int cell = static_cast<int>(rng.index(g.cell_count(l)));
    const auto children = g.children_of(l, cell);
    CHECK(children.size() == (l == 0 ? 2u : 4u));
    // every pixel of the parent lands in exactly one listed child
    const auto [ox, oy] = g.cell_origin(l, cell);
    for (int dy = 0; dy < g.level(l).cell_h; ++dy)
      for (int dx = 0; dx < g.level(l).cell_w; ++dx) {
        const int child = g.locate_cell(l + 1, ox + dx, oy + dy);
        CHECK(std::count(children.begin(), children.end(), child) == 1);
      }
    // and children reference back to the parent
    for (int c : children) CHECK(g.parent_of(l + 1, c) == cell);
  }
}
