#pragma once

#include <vector>

namespace meshloc::img {

/// Hierarchical image partition. Level 0 is the whole frame; level 1 splits
/// it into two side-by-side halves; every deeper level splits each cell 2x2,
/// so level l >= 1 has 2^l columns by 2^(l-1) rows. With the default 7 levels
/// on 512x288 the finest cells are 8x9 pixels. Cells are indexed row-major.
class GridHierarchy {
 public:
  struct Level {
    int cols = 1, rows = 1;
    int cell_w = 0, cell_h = 0;  // pixels
  };

  /// Throws ConfigError when the frame does not divide evenly at every level.
  static GridHierarchy build(int width = 512, int height = 288, int levels = 7);

  int width() const { return width_; }
  int height() const { return height_; }
  int level_count() const { return static_cast<int>(levels_.size()); }
  const Level& level(int l) const { return levels_.at(static_cast<std::size_t>(l)); }
  int cell_count(int l) const { return level(l).cols * level(l).rows; }

  /// Cell containing continuous pixel (u, v); throws on out-of-bounds pixels.
  int locate_cell(int l, double u, double v) const;

  /// Parent cell one level up (level must be >= 1).
  int parent_of(int l, int cell) const;

  /// Children one level down: 2 cells below level 0, otherwise 4.
  std::vector<int> children_of(int l, int cell) const;

  int cell_col(int l, int cell) const { return cell % level(l).cols; }
  int cell_row(int l, int cell) const { return cell / level(l).cols; }

  /// Pixel origin (top-left corner) of a cell.
  std::pair<double, double> cell_origin(int l, int cell) const;

 private:
  int width_ = 0, height_ = 0;
  std::vector<Level> levels_;
};

}  // namespace meshloc::img
