#include "shnet/backbone.hpp"

#include "shnet/ops.hpp"

namespace shnet {

VisualBackbone::VisualBackbone(const BackboneConfig& config, Initializer& init)
    : config_(config) {
  if (config.resolution == 0 || config.resolution % 16 != 0) {
    throw ShapeError("backbone resolution must be a positive multiple of 16, got " +
                     std::to_string(config.resolution));
  }
  std::size_t in = 3;
  for (std::size_t b = 0; b < 4; ++b) {
    const std::size_t out = config.widths[b];
    conv_w[b] = init.he({out, in, 3, 3}, in * 9);
    conv_b[b] = init.zeros({out});
    in = out;
  }
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t in_ch = config.widths[l + 1];
    proj_w[l] = init.he({config.channels, in_ch, 1, 1}, in_ch);
    proj_b[l] = init.zeros({config.channels});
  }
}

HierarchicalFeatures VisualBackbone::extract(const Tensor& image) const {
  const std::size_t r = config_.resolution;
  if (image.shape() != Shape{3, r, r}) {
    throw ShapeError("backbone expects image [3x" + std::to_string(r) + "x" +
                     std::to_string(r) + "], got " + shape_str(image.shape()));
  }
  HierarchicalFeatures out;
  Tensor x = image;
  for (std::size_t b = 0; b < 4; ++b) {
    x = ops::relu(ops::conv2d(x, conv_w[b], conv_b[b], {.stride = 1, .pad = 1}));
    x = ops::max_pool2d(x, 2, 2);
    if (b >= 1) {
      Tensor pooled =
          ops::adaptive_avg_pool2d(x, config_.feature_size, config_.feature_size);
      out.levels[b - 1] = ops::conv2d(pooled, proj_w[b - 1], proj_b[b - 1]);
    }
  }
  return out;
}

void VisualBackbone::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t b = 0; b < 4; ++b) {
    out.push_back({prefix + "block" + std::to_string(b + 1) + ".w", conv_w[b],
                   ParamRole::kWeight});
    out.push_back({prefix + "block" + std::to_string(b + 1) + ".b", conv_b[b],
                   ParamRole::kNoDecay});
  }
  for (std::size_t l = 0; l < 3; ++l) {
    out.push_back({prefix + "proj" + std::to_string(l + 2) + ".w", proj_w[l],
                   ParamRole::kWeight});
    out.push_back({prefix + "proj" + std::to_string(l + 2) + ".b", proj_b[l],
                   ParamRole::kNoDecay});
  }
}

}  // namespace shnet
