#pragma once

#include <array>
#include <string>

#include "shnet/params.hpp"
#include "shnet/tensor.hpp"

namespace shnet {

/// Visual maps tapped after blocks 2, 3 and 4, each [C x H x W].
struct HierarchicalFeatures {
  std::array<Tensor, 3> levels;
};

struct BackboneConfig {
  std::size_t resolution = 64;
  std::size_t channels = 64;      // C
  std::size_t feature_size = 8;   // H = W
  std::array<std::size_t, 4> widths{16, 32, 64, 64};
};

/// Four (conv3x3 -> relu -> maxpool2x2) blocks. Each tap is adaptively
/// average-pooled to H x W and projected to C channels by a 1x1 conv.
class VisualBackbone {
 public:
  VisualBackbone(const BackboneConfig& config, Initializer& init);

  /// image: [3 x R x R] with R the configured resolution.
  HierarchicalFeatures extract(const Tensor& image) const;

  void collect(ParamList& out, const std::string& prefix) const;
  const BackboneConfig& config() const { return config_; }

  std::array<Tensor, 4> conv_w;
  std::array<Tensor, 4> conv_b;
  std::array<Tensor, 3> proj_w;
  std::array<Tensor, 3> proj_b;

 private:
  BackboneConfig config_;
};

}  // namespace shnet
