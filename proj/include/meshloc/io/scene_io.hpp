#pragma once

#include <string>
#include <vector>

#include "meshloc/scene/camera.hpp"
#include "meshloc/scene/frame.hpp"
#include "meshloc/scene/mesh.hpp"

namespace meshloc::io {

struct FrameEntry {
  int id = 0;
  int config = 0;
  std::string rgb;    // path relative to the scene directory
  std::string depth;
};

/// Scene directory metadata (scene.json): intrinsics, the depth quantization
/// scale, the semantic palette with dynamic flags, and the frame index.
struct SceneMeta {
  std::uint64_t seed = 0;
  scene::PinholeCamera intrinsics;
  double depth_scale = 0.001;  // scene units per 16-bit depth tick
  std::vector<scene::PaletteEntry> palette;
  std::vector<FrameEntry> frames;
};

void write_scene_meta(const std::string& path, const SceneMeta& meta);
SceneMeta read_scene_meta(const std::string& path);

/// Loads one frame listed in the scene metadata, resizing to the embedder's
/// 512x288 input when the stored images differ (bilinear RGB, nearest depth).
scene::FrameRecord load_frame(const std::string& scene_dir, const SceneMeta& meta,
                              const FrameEntry& entry, const scene::RigidTransform& pose,
                              int target_width = 512, int target_height = 288);

}  // namespace meshloc::io
