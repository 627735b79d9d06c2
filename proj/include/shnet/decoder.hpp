#pragma once

#include <array>
#include <string>
#include <vector>

#include "shnet/params.hpp"
#include "shnet/tensor.hpp"

namespace shnet {

inline constexpr std::array<std::size_t, 4> kAsppRates{1, 2, 4, 6};

struct DecoderConfig {
  std::size_t in_channels = 64;   // C
  std::size_t resolution = 64;    // R
  std::size_t stage1_channels = 32;
  std::size_t stage2_channels = 16;
};

/// Parallel same-padded 3x3 atrous convs at each rate plus a global-pool
/// branch (pool -> 1x1 conv -> broadcast), concatenated and fused back to
/// C channels with a 1x1 conv. Every branch and the fusion end in relu.
class Aspp {
 public:
  Aspp(std::size_t channels, Initializer& init);

  Tensor forward(const Tensor& x) const;
  /// Branch outputs in rate order, then the pooled branch.
  std::vector<Tensor> branches(const Tensor& x) const;

  void collect(ParamList& out, const std::string& prefix) const;

  std::array<Tensor, 4> atrous_w;
  std::array<Tensor, 4> atrous_b;
  Tensor pool_w, pool_b;
  Tensor fuse_w, fuse_b;
};

/// Two (bilinear x2 -> conv3x3 -> relu) stages, bilinear to R x R, 1x1 conv
/// to one channel, sigmoid. Output [1 x R x R].
class MaskHead {
 public:
  MaskHead(const DecoderConfig& config, Initializer& init);

  Tensor forward(const Tensor& decoded) const;
  /// Pre-sigmoid logits.
  Tensor logits(const Tensor& decoded) const;

  void collect(ParamList& out, const std::string& prefix) const;

  Tensor up1_w, up1_b, up2_w, up2_b, out_w, out_b;

 private:
  DecoderConfig config_;
};

class Decoder {
 public:
  Decoder(const DecoderConfig& config, Initializer& init)
      : aspp(config.in_channels, init), head(config, init) {}

  Tensor forward(const Tensor& g) const { return head.forward(aspp.forward(g)); }
  void collect(ParamList& out, const std::string& prefix) const {
    aspp.collect(out, prefix + "aspp.");
    head.collect(out, prefix + "head.");
  }

  Aspp aspp;
  MaskHead head;
};

/// BCE of a predicted mask against a binary target of the same shape.
Tensor mask_loss(const Tensor& probs, const Tensor& target);

/// 0/255 binary PGM (P5) after thresholding at 0.5.
void write_mask_pgm(const std::string& path, const Tensor& probs);
/// 9-byte "SHNETMASK", u32 H, u32 W (17-byte header), then H*W
/// little-endian float64 probabilities.
void write_probability_dump(const std::string& path, const Tensor& probs);
Tensor read_probability_dump(const std::string& path);

}  // namespace shnet
