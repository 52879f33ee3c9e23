#pragma once

#include <cstdint>

#include "meshloc/common/rng.hpp"
#include "meshloc/scene/frame.hpp"
#include "meshloc/scene/mesh.hpp"

namespace meshloc::train {

/// Augmentation strengths. A strength of zero disables the transform exactly.
struct AugmentConfig {
  double blur_sigma_max = 1.5;       // pixels
  double noise_sigma_max = 0.02;
  double contrast_delta = 0.2;       // multiplicative range around 1
  double brightness_delta = 0.1;     // additive range around 0
  double rot_z_deg = 180.0;          // mesh rotation ranges, stage 1 only
  double rot_xy_deg = 5.0;
};

struct AugmentedSample {
  scene::Image rgb;           // depth is never touched
  scene::TriangleMesh mesh;
};

/// Image jitter (blur, Gaussian noise, illumination/contrast) in every stage;
/// random mesh rotation about the origin in stage 1 only. Deterministic for a
/// fixed seed.
AugmentedSample augment_sample(const scene::FrameRecord& frame, const scene::TriangleMesh& mesh,
                               int stage, const AugmentConfig& config, std::uint64_t seed);

}  // namespace meshloc::train
