#include "meshloc/img/cnn.hpp"

#include <cmath>

#include "meshloc/common/errors.hpp"

namespace meshloc::img {

using num::BnStatsT;
using num::ParamSet;
using num::Tape;
using num::Tensor;
using num::Var;

void CnnConfig::validate() const {
  if (in_channels <= 0 || initial_filters <= 0)
    throw ConfigError("CnnConfig: channel counts must be positive");
  if (set_reps.empty()) throw ConfigError("CnnConfig: at least one DarknetSet required");
  for (int r : set_reps)
    if (r < 0) throw ConfigError("CnnConfig: negative DarknetBlock repetition");
  if (static_cast<int>(head_widths.size()) != levels())
    throw ConfigError("CnnConfig: need one head width per level (" + std::to_string(levels()) +
                      "), got " + std::to_string(head_widths.size()));
  for (int w : head_widths)
    if (w <= 0) throw ConfigError("CnnConfig: head widths must be positive");
  bool any_blocks = false;
  for (int r : set_reps) any_blocks = any_blocks || r > 0;
  if (any_blocks && initial_filters % 2 != 0)
    throw ConfigError("CnnConfig: DarknetBlocks halve the channel count; initial_filters must be even");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
    throw ConfigError("CnnConfig: leaky slope must lie in (0,1)");
}

namespace {

Tensor he_kernel(int out_c, int in_c, int kh, int kw, Rng& rng) {
  Tensor t({out_c, in_c, kh, kw});
  const double stddev = std::sqrt(2.0 / (in_c * kh * kw));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

void add_conv_bn(ParamSet& params, const std::string& p, int out_c, int in_c, int k, Rng& rng) {
  params.add(p + "conv", he_kernel(out_c, in_c, k, k, rng));
  params.add(p + "bn.gamma", Tensor::full({out_c}, 1.0));
  params.add(p + "bn.beta", Tensor::zeros({out_c}));
  params.add(p + "bn.mean", Tensor::zeros({out_c}), /*trainable=*/false);
  params.add(p + "bn.var", Tensor::full({out_c}, 1.0), /*trainable=*/false);
}

struct BnMode {
  bool use_batch_stats = false;
  bool update_running = false;
  double momentum = 0.1;
  double eps = 1e-5;
};

Var conv_bn(Tape& tape, ParamSet& params, const std::string& p, Var x, int stride, int pad,
            double slope, const BnMode& bn) {
  Var y = num::conv2d(x, tape.param(params, p + "conv"), stride, pad);
  BnStatsT<double> stats{&params.at(p + "bn.mean"), &params.at(p + "bn.var")};
  y = num::batch_norm2d(y, tape.param(params, p + "bn.gamma"), tape.param(params, p + "bn.beta"),
                        stats, bn.use_batch_stats, bn.update_running, bn.momentum, bn.eps);
  return num::leaky_relu(y, slope);
}

}  // namespace

void init_cnn_params(const CnnConfig& config, ParamSet& params, Rng& rng,
                     const std::string& prefix) {
  config.validate();
  add_conv_bn(params, prefix + "stem.", config.initial_filters, config.in_channels, 3, rng);
  int channels = config.initial_filters;
  for (std::size_t s = 0; s < config.set_reps.size(); ++s) {
    const std::string sp = prefix + "set" + std::to_string(s) + ".";
    add_conv_bn(params, sp + "down.", channels * 2, channels, 3, rng);
    channels *= 2;
    for (int b = 0; b < config.set_reps[s]; ++b) {
      const std::string bp = sp + "block" + std::to_string(b) + ".";
      add_conv_bn(params, bp + "a.", channels / 2, channels, 1, rng);
      add_conv_bn(params, bp + "b.", channels, channels / 2, 3, rng);
    }
  }
  // heads: level l projects the map at depth levels()-1-l
  int map_channels = config.initial_filters;
  std::vector<int> channels_per_map = {map_channels};
  for (std::size_t s = 0; s < config.set_reps.size(); ++s) {
    map_channels *= 2;
    channels_per_map.push_back(map_channels);
  }
  for (int l = 0; l < config.levels(); ++l) {
    const std::string hp = prefix + "head" + std::to_string(l) + ".";
    const int src = channels_per_map[static_cast<std::size_t>(config.levels() - 1 - l)];
    params.add(hp + "proj", he_kernel(config.head_widths[static_cast<std::size_t>(l)], src, 1, 1, rng));
    params.add(hp + "bias", Tensor::zeros({config.head_widths[static_cast<std::size_t>(l)]}));
  }
}

std::vector<Var> embed_image_t(Tape& tape, ParamSet& params, const Tensor& rgbd,
                               const GridHierarchy& grid, const CnnConfig& config,
                               bool use_batch_stats, bool update_running,
                               const std::string& prefix) {
  config.validate();
  if (rgbd.rank() != 3 || rgbd.dim(0) != config.in_channels)
    throw std::invalid_argument("embed_image: input must be [" + std::to_string(config.in_channels) +
                                ",H,W], got " + rgbd.shape_str());
  if (grid.level_count() != config.levels())
    throw std::invalid_argument("embed_image: grid has " + std::to_string(grid.level_count()) +
                                " levels, config expects " + std::to_string(config.levels()));
  BnMode bn{use_batch_stats, update_running, config.bn_momentum, config.bn_eps};

  std::vector<Var> maps;
  maps.reserve(static_cast<std::size_t>(config.levels()));
  Var x = conv_bn(tape, params, prefix + "stem.", tape.constant(rgbd), 1, 1, config.leaky_slope, bn);
  maps.push_back(x);
  for (std::size_t s = 0; s < config.set_reps.size(); ++s) {
    const std::string sp = prefix + "set" + std::to_string(s) + ".";
    x = conv_bn(tape, params, sp + "down.", x, 2, 1, config.leaky_slope, bn);
    for (int b = 0; b < config.set_reps[s]; ++b) {
      const std::string bp = sp + "block" + std::to_string(b) + ".";
      Var t = conv_bn(tape, params, bp + "a.", x, 1, 0, config.leaky_slope, bn);
      t = conv_bn(tape, params, bp + "b.", t, 1, 1, config.leaky_slope, bn);
      x = num::add(x, t);
    }
    maps.push_back(x);
  }

  std::vector<Var> out;
  out.reserve(static_cast<std::size_t>(config.levels()));
  for (int l = 0; l < config.levels(); ++l) {
    const std::string hp = prefix + "head" + std::to_string(l) + ".";
    Var src = maps[static_cast<std::size_t>(config.levels() - 1 - l)];
    Var pooled = num::adaptive_avg_pool2d(src, grid.level(l).rows, grid.level(l).cols);
    Var projected = num::add_channel_bias(num::conv2d(pooled, tape.param(params, hp + "proj"), 1, 0),
                                          tape.param(params, hp + "bias"));
    out.push_back(num::chw_to_rows(projected));
  }
  return out;
}

CellEmbeddingSet embed_image(const Tensor& rgbd, const GridHierarchy& grid,
                             const CnnConfig& config, ParamSet& params) {
  Tape tape;
  std::vector<Var> vars = embed_image_t(tape, params, rgbd, grid, config,
                                        /*use_batch_stats=*/false, /*update_running=*/false);
  CellEmbeddingSet set;
  set.levels.reserve(vars.size());
  for (const Var& v : vars) set.levels.push_back(tape.value(v).matrix());
  return set;
}

Tensor frame_to_tensor(const scene::FrameRecord& frame, double depth_max_range) {
  if (frame.rgb.channels != 3 || frame.depth.channels != 1 ||
      frame.rgb.width != frame.depth.width || frame.rgb.height != frame.depth.height)
    throw DataError("frame_to_tensor: frame must carry aligned 3-channel RGB and 1-channel depth");
  if (depth_max_range <= 0.0) throw ConfigError("frame_to_tensor: depth_max_range must be positive");
  const int H = frame.rgb.height, W = frame.rgb.width;
  Tensor t({4, H, W});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (std::size_t i = 0; i < 3 * plane; ++i) t[static_cast<Eigen::Index>(i)] = frame.rgb.data[i];
  for (std::size_t i = 0; i < plane; ++i)
    t[static_cast<Eigen::Index>(3 * plane + i)] = frame.depth.data[i] / depth_max_range;
  return t;
}

}  // namespace meshloc::img
