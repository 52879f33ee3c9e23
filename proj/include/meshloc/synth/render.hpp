#pragma once

#include "meshloc/synth/scene_gen.hpp"

namespace meshloc::synth {

/// Z-buffer rasterization of one configuration under one pose: half-space
/// edge functions with the top-left fill rule, perspective-correct depth and
/// per-vertex color interpolation, near-plane clipping. Pixels with no
/// geometry keep depth 0 (the invalid marker).
scene::FrameRecord render_rgbd(const SyntheticScene& scene, int config_id,
                               const scene::RigidTransform& pose,
                               const scene::PinholeCamera& cam);

}  // namespace meshloc::synth
