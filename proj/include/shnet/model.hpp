#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shnet/backbone.hpp"
#include "shnet/decoder.hpp"
#include "shnet/hcam.hpp"
#include "shnet/params.hpp"
#include "shnet/sfm.hpp"
#include "shnet/text_encoder.hpp"

namespace shnet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Variant {
  kBaseline,
  kOnlyHcam,
  kOnlySfm,
  kSfmConv3d,
  kShnetNoGlove,
  kShnetNoPe,
  kShnet,
};

/// In ablation-table row order.
inline constexpr std::array<Variant, 7> kAllVariants{
    Variant::kBaseline,     Variant::kOnlyHcam,  Variant::kOnlySfm,
    Variant::kSfmConv3d,    Variant::kShnetNoGlove, Variant::kShnetNoPe,
    Variant::kShnet,
};

/// CLI spelling, e.g. "only_sfm".
std::string_view variant_name(Variant v);
/// Row label, e.g. "Only SFM".
std::string_view variant_label(Variant v);
/// Throws ConfigError for unknown names.
Variant parse_variant(std::string_view name);

bool uses_sfm(Variant v);
bool uses_hcam(Variant v);

struct ModelConfig {
  Variant variant = Variant::kShnet;
  std::size_t resolution = 64;
  std::size_t channels = 64;
  std::size_t heads = 4;
  std::size_t embed_dim = 64;
  /// Spatial size of the fused maps; 0 means resolution / 8.
  std::size_t feature_size = 0;
  std::uint64_t seed = 0;
  /// Optional pretrained word vectors; ignored by shnet_no_glove.
  std::filesystem::path embeddings;
};

struct ForwardOptions {
  HcamOptions hcam;
};

/// Text encoder, backbone, variant-specific fusion, then ASPP and the mask
/// head.
class Model {
 public:
  Model(const ModelConfig& config, const Vocabulary& vocab);

  /// image [3 x R x R], token indices -> probabilities [1 x R x R].
  Tensor forward(const Tensor& image, const std::vector<std::size_t>& tokens,
                 const ForwardOptions& options = {}) const;
  /// Fused multi-modal map fed to the decoder, [C x H x W].
  Tensor fuse(const Tensor& image, const std::vector<std::size_t>& tokens,
              const ForwardOptions& options = {}) const;

  ParamList parameters() const;
  const ModelConfig& config() const { return config_; }
  std::size_t feature_size() const { return backbone_.config().feature_size; }

  TextEncoder& text() { return text_; }
  const std::vector<SfmLevel>& sfm() const { return sfm_; }
  const std::optional<Hcam>& hcam() const { return hcam_; }

 private:
  ModelConfig config_;
  Initializer init_;
  TextEncoder text_;
  VisualBackbone backbone_;
  std::vector<SfmLevel> sfm_;
  std::optional<Hcam> hcam_;
  // 1x1 merge of concatenated levels (baseline, only_sfm) or the depth
  // fusion weights (sfm_conv3d).
  Tensor merge_w_;
  Tensor merge_b_;
  Decoder decoder_;
};

}  // namespace shnet
