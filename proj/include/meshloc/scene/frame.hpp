#pragma once

#include <vector>

#include "meshloc/scene/transform.hpp"

namespace meshloc::scene {

/// Planar image, CHW layout, double-valued samples.
struct Image {
  int width = 0, height = 0, channels = 0;
  std::vector<double> data;

  static Image zeros(int width, int height, int channels) {
    Image im;
    im.width = width;
    im.height = height;
    im.channels = channels;
    im.data.assign(static_cast<std::size_t>(width) * height * channels, 0.0);
    return im;
  }

  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

/// One RGB-D observation: colors in [0,1], depth in scene units (0 marks an
/// invalid pixel), ground-truth pose (world-to-camera) and the scene
/// configuration it was rendered from.
struct FrameRecord {
  Image rgb;    // 3 channels
  Image depth;  // 1 channel
  RigidTransform pose;
  int config_id = 0;
  int frame_id = 0;
};

}  // namespace meshloc::scene
