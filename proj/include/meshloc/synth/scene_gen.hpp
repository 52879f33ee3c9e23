#pragma once

#include <cstdint>
#include <vector>

#include "meshloc/scene/camera.hpp"
#include "meshloc/scene/frame.hpp"
#include "meshloc/scene/mesh.hpp"

namespace meshloc::synth {

struct SceneParams {
  Eigen::Vector3d room_size = {4.0, 4.0, 2.6};  // scene units
  int object_count = 8;
  double dynamic_fraction = 0.3;
  double subdivision = 0.45;      // target surface quad edge length
  int configuration_count = 3;    // configuration 0 is the training state
  int trajectory_length = 20;
  double illumination_delta = 0.2;
  double max_displacement = 0.5;  // dynamic object motion per configuration
};

/// Per-configuration scene state: a world-space rigid motion per object
/// (identity for static objects and for configuration 0) plus a global
/// illumination factor applied at render time.
struct SceneConfiguration {
  std::vector<scene::RigidTransform> object_motion;
  double illumination = 1.0;
};

struct SyntheticScene {
  scene::TriangleMesh mesh;  // configuration-0 geometry, world coordinates
  std::vector<scene::PaletteEntry> palette;
  std::vector<std::pair<int, int>> object_vertex_ranges;  // [begin, end) per object
  std::vector<bool> object_dynamic;
  std::vector<SceneConfiguration> configurations;
  std::vector<scene::RigidTransform> trajectory;  // world-to-camera ground truth
  scene::PinholeCamera intrinsics;
  std::uint64_t seed = 0;

  /// Geometry with a configuration's dynamic displacements applied.
  scene::TriangleMesh configured_mesh(int config_id) const;
};

/// Procedural room: inward-facing shell plus textured boxes, a smooth
/// interior camera orbit, and per-object palette entries with exactly
/// round(dynamic_fraction * object_count) dynamic objects. Deterministic per
/// seed. Throws ConfigError for infeasible parameters.
SyntheticScene generate_scene(std::uint64_t seed, const SceneParams& params);

}  // namespace meshloc::synth
