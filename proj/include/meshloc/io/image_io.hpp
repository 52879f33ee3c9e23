#pragma once

#include <string>

#include "meshloc/scene/frame.hpp"

namespace meshloc::io {

/// 8-bit binary PPM (P6). Values are clamped from [0,1] to 0..255.
void write_ppm(const std::string& path, const scene::Image& rgb);
scene::Image read_ppm(const std::string& path);

/// 16-bit binary PGM (P5, maxval 65535), big-endian samples per the format.
/// Depth in scene units is quantized by depth_scale units per tick; zero
/// stays the invalid marker.
void write_pgm16(const std::string& path, const scene::Image& depth, double depth_scale);
scene::Image read_pgm16(const std::string& path, double depth_scale);

/// Bilinear RGB resize ([0,1] samples).
scene::Image resize_bilinear(const scene::Image& rgb, int width, int height);

/// Nearest-neighbor depth resize (interpolating across depth edges is unsafe).
scene::Image resize_nearest(const scene::Image& depth, int width, int height);

}  // namespace meshloc::io
