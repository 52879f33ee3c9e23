#pragma once

#include <string>
#include <vector>

#include "meshloc/scene/frame.hpp"

namespace meshloc::io {

struct Series {
  std::string label;
  std::vector<double> values;
  Eigen::Vector3d color = {0.2, 0.4, 0.8};
};

/// Simple software-rendered charts (axes, ticks, labels drawn with a built-in
/// 5x7 glyph set) for the `report` subcommand; emitted as PPM images.
scene::Image render_line_chart(const std::vector<Series>& series, const std::string& title,
                               int width = 900, int height = 540);

scene::Image render_bar_chart(const std::vector<std::string>& labels,
                              const std::vector<double>& values, const std::string& title,
                              int width = 900, int height = 540);

}  // namespace meshloc::io
