#include "meshloc/img/grid.hpp"

#include <cmath>
#include <string>

#include "meshloc/common/errors.hpp"

namespace meshloc::img {

GridHierarchy GridHierarchy::build(int width, int height, int levels) {
  if (width <= 0 || height <= 0 || levels < 1)
    throw ConfigError("GridHierarchy: width, height and level count must be positive");
  GridHierarchy g;
  g.width_ = width;
  g.height_ = height;
  g.levels_.reserve(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    Level lv;
    lv.cols = l == 0 ? 1 : (1 << l);
    lv.rows = l == 0 ? 1 : (1 << (l - 1));
    if (width % lv.cols != 0 || height % lv.rows != 0)
      throw ConfigError("GridHierarchy: " + std::to_string(width) + "x" + std::to_string(height) +
                        " is not divisible into the level-" + std::to_string(l) + " grid " +
                        std::to_string(lv.cols) + "x" + std::to_string(lv.rows));
    lv.cell_w = width / lv.cols;
    lv.cell_h = height / lv.rows;
    g.levels_.push_back(lv);
  }
  return g;
}

int GridHierarchy::locate_cell(int l, double u, double v) const {
  if (u < 0.0 || u >= width_ || v < 0.0 || v >= height_)
    throw DataError("locate_cell: pixel (" + std::to_string(u) + "," + std::to_string(v) +
                    ") outside " + std::to_string(width_) + "x" + std::to_string(height_));
  const Level& lv = level(l);
  const int col = static_cast<int>(u) / lv.cell_w;
  const int row = static_cast<int>(v) / lv.cell_h;
  return row * lv.cols + col;
}

int GridHierarchy::parent_of(int l, int cell) const {
  if (l < 1 || l >= level_count()) throw ConfigError("parent_of: level must be in [1, levels)");
  if (l == 1) return 0;
  const Level& lv = level(l);
  const Level& up = level(l - 1);
  const int col = cell % lv.cols;
  const int row = cell / lv.cols;
  return (row / 2) * up.cols + (col / 2);
}

std::vector<int> GridHierarchy::children_of(int l, int cell) const {
  if (l < 0 || l + 1 >= level_count())
    throw ConfigError("children_of: level must have a level below it");
  const Level& down = level(l + 1);
  if (l == 0) return {0, 1};
  const Level& lv = level(l);
  const int col = cell % lv.cols;
  const int row = cell / lv.cols;
  std::vector<int> out;
  out.reserve(4);
  for (int dr = 0; dr < 2; ++dr)
    for (int dc = 0; dc < 2; ++dc) out.push_back((2 * row + dr) * down.cols + (2 * col + dc));
  return out;
}

std::pair<double, double> GridHierarchy::cell_origin(int l, int cell) const {
  const Level& lv = level(l);
  return {static_cast<double>((cell % lv.cols) * lv.cell_w),
          static_cast<double>((cell / lv.cols) * lv.cell_h)};
}

}  // namespace meshloc::img
