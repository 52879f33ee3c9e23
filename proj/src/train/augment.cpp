#include "meshloc/train/augment.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "meshloc/common/errors.hpp"

namespace meshloc::train {

namespace {

void gaussian_blur(scene::Image& img, double sigma) {
  const int radius = static_cast<int>(std::ceil(2.0 * sigma));
  if (radius < 1) return;
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * (k * k) / (sigma * sigma));
    norm += kernel[static_cast<std::size_t>(k + radius)];
  }
  for (double& k : kernel) k /= norm;

  scene::Image tmp = img;
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int xx = std::clamp(x + k, 0, img.width - 1);
          acc += kernel[static_cast<std::size_t>(k + radius)] * img.at(c, y, xx);
        }
        tmp.at(c, y, x) = acc;
      }
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int yy = std::clamp(y + k, 0, img.height - 1);
          acc += kernel[static_cast<std::size_t>(k + radius)] * tmp.at(c, yy, x);
        }
        img.at(c, y, x) = acc;
      }
  }
}

}  // namespace

AugmentedSample augment_sample(const scene::FrameRecord& frame, const scene::TriangleMesh& mesh,
                               int stage, const AugmentConfig& config, std::uint64_t seed) {
  if (stage < 1 || stage > 3) throw ConfigError("augment_sample: stage must be 1, 2 or 3");
  Rng rng(seed);
  AugmentedSample out{frame.rgb, mesh};

  if (config.blur_sigma_max > 0.0) gaussian_blur(out.rgb, rng.uniform(0.0, config.blur_sigma_max));
  if (config.contrast_delta > 0.0 || config.brightness_delta > 0.0) {
    const double contrast = 1.0 + rng.uniform(-config.contrast_delta, config.contrast_delta);
    const double brightness = rng.uniform(-config.brightness_delta, config.brightness_delta);
    for (double& p : out.rgb.data) p = std::clamp((p - 0.5) * contrast + 0.5 + brightness, 0.0, 1.0);
  }
  if (config.noise_sigma_max > 0.0) {
    const double sigma = rng.uniform(0.0, config.noise_sigma_max);
    for (double& p : out.rgb.data) p = std::clamp(p + rng.normal(0.0, sigma), 0.0, 1.0);
  }

  if (stage == 1 && (config.rot_z_deg > 0.0 || config.rot_xy_deg > 0.0)) {
    const double to_rad = M_PI / 180.0;
    const double rx = rng.uniform(-config.rot_xy_deg, config.rot_xy_deg) * to_rad;
    const double ry = rng.uniform(-config.rot_xy_deg, config.rot_xy_deg) * to_rad;
    const double rz = rng.uniform(-config.rot_z_deg, config.rot_z_deg) * to_rad;
    const Eigen::Matrix3d R = scene::rotation_zyx(rx, ry, rz);
    out.mesh.positions = mesh.positions * R.transpose();
    out.mesh.normals = mesh.normals * R.transpose();
  }
  return out;
}

}  // namespace meshloc::train
