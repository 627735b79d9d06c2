#include "shnet/model.hpp"

#include "shnet/ops.hpp"

namespace shnet {

namespace {

struct VariantInfo {
  Variant variant;
  std::string_view name;
  std::string_view label;
};

constexpr std::array<VariantInfo, 7> kVariantInfo{{
    {Variant::kBaseline, "baseline", "Baseline"},
    {Variant::kOnlyHcam, "only_hcam", "Only HCAM"},
    {Variant::kOnlySfm, "only_sfm", "Only SFM"},
    {Variant::kSfmConv3d, "sfm_conv3d", "SFM+Conv3D"},
    {Variant::kShnetNoGlove, "shnet_no_glove", "SHNet w/o Glove"},
    {Variant::kShnetNoPe, "shnet_no_pe", "SHNet w/o P.E"},
    {Variant::kShnet, "shnet", "SHNet"},
}};

const VariantInfo& info(Variant v) {
  for (const auto& i : kVariantInfo)
    if (i.variant == v) return i;
  throw ConfigError("unknown variant");
}

BackboneConfig backbone_config(const ModelConfig& c) {
  if (c.resolution == 0 || c.channels == 0) {
    throw ConfigError("resolution and channels must be positive");
  }
  BackboneConfig b;
  b.resolution = c.resolution;
  b.channels = c.channels;
  b.feature_size = c.feature_size != 0 ? c.feature_size : c.resolution / 8;
  return b;
}

EmbeddingTable make_embeddings(const ModelConfig& c, const Vocabulary& vocab) {
  const std::uint64_t seed = c.seed ^ 0x5eedULL;
  if (c.variant == Variant::kShnetNoGlove || c.embeddings.empty()) {
    return random_embeddings(vocab, c.embed_dim, seed);
  }
  return load_embeddings(c.embeddings, vocab, c.embed_dim, seed);
}

Tensor tile(const Tensor& vec, std::size_t h, std::size_t w) {
  const std::size_t c = vec.numel();
  return ops::expand(ops::reshape(vec, {c, 1, 1}), {c, h, w});
}

}  // namespace

std::string_view variant_name(Variant v) { return info(v).name; }
std::string_view variant_label(Variant v) { return info(v).label; }

Variant parse_variant(std::string_view name) {
  for (const auto& i : kVariantInfo)
    if (i.name == name) return i.variant;
  std::string known;
  for (const auto& i : kVariantInfo) {
    if (!known.empty()) known += ", ";
    known += i.name;
  }
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected one of " +
                    known + ")");
}

bool uses_sfm(Variant v) {
  return v != Variant::kBaseline && v != Variant::kOnlyHcam;
}

bool uses_hcam(Variant v) {
  return v == Variant::kOnlyHcam || v == Variant::kShnet ||
         v == Variant::kShnetNoPe || v == Variant::kShnetNoGlove;
}

Model::Model(const ModelConfig& config, const Vocabulary& vocab)
    : config_(config),
      init_(config.seed),
      text_(make_embeddings(config, vocab), config.channels, init_),
      backbone_(backbone_config(config), init_),
      decoder_({.in_channels = config.channels,
                .resolution = config.resolution,
                .stage1_channels = std::max<std::size_t>(1, config.channels / 2),
                .stage2_channels = std::max<std::size_t>(1, config.channels / 4)},
               init_) {
  const std::size_t c = config.channels;
  const std::size_t h = backbone_.config().feature_size;
  if (config.heads == 0 || c % config.heads != 0) {
    throw ConfigError("channels (" + std::to_string(c) +
                      ") must be divisible by heads (" +
                      std::to_string(config.heads) + ")");
  }
  const Variant v = config.variant;
  if (uses_sfm(v)) {
    SfmConfig sc;
    sc.channels = c;
    sc.feature_size = h;
    sc.max_words = kMaxTokens;
    sc.heads = config.heads;
    sc.positional = v != Variant::kShnetNoPe;
    for (int level = 0; level < 3; ++level) sfm_.emplace_back(sc, init_);
  }
  if (v == Variant::kOnlyHcam) {
    hcam_.emplace(HcamConfig{.visual_channels = 2 * c,
                             .context_channels = c,
                             .out_channels = c},
                  init_);
  } else if (uses_hcam(v)) {
    hcam_.emplace(HcamConfig{.visual_channels = c,
                             .context_channels = c,
                             .out_channels = c},
                  init_);
  }
  if (v == Variant::kBaseline) {
    merge_w_ = init_.he({c, 6 * c, 1, 1}, 6 * c);
    merge_b_ = init_.zeros({c});
  } else if (v == Variant::kOnlySfm) {
    merge_w_ = init_.he({c, 3 * c, 1, 1}, 3 * c);
    merge_b_ = init_.zeros({c});
  } else if (v == Variant::kSfmConv3d) {
    merge_w_ = init_.he({c, c, 3, 3, 3}, c * 27);
    merge_b_ = init_.zeros({c});
  }
}

Tensor Model::fuse(const Tensor& image, const std::vector<std::size_t>& tokens,
                   const ForwardOptions& options) const {
  const WordFeatures words = text_.encode(tokens);
  const HierarchicalFeatures visual = backbone_.extract(image);
  const std::size_t h = backbone_.config().feature_size;
  const Variant v = config_.variant;

  if (!uses_sfm(v)) {
    const Tensor sentence = tile(words.final_state, h, h);
    std::array<LevelSplit, 3> raw;
    for (std::size_t i = 0; i < 3; ++i) {
      raw[i] = {ops::concat({visual.levels[i], sentence}, 0), words.features};
    }
    if (v == Variant::kOnlyHcam) return hcam_->forward(raw, options.hcam);
    Tensor all = ops::concat({raw[0].visual, raw[1].visual, raw[2].visual}, 0);
    return ops::conv2d(all, merge_w_, merge_b_);
  }

  std::array<LevelSplit, 3> fused;
  for (std::size_t i = 0; i < 3; ++i) {
    const MultiModalSequence seq = sfm_[i].forward(visual.levels[i], words.features);
    fused[i] = {visual_part(seq), word_part(seq)};
  }
  if (hcam_) return hcam_->forward(fused, options.hcam);
  std::array<Tensor, 3> maps{fused[0].visual, fused[1].visual, fused[2].visual};
  if (v == Variant::kSfmConv3d) return fuse_depth(maps, merge_w_, merge_b_);
  return ops::conv2d(ops::concat({maps[0], maps[1], maps[2]}, 0), merge_w_,
                     merge_b_);
}

Tensor Model::forward(const Tensor& image, const std::vector<std::size_t>& tokens,
                      const ForwardOptions& options) const {
  return decoder_.forward(fuse(image, tokens, options));
}

ParamList Model::parameters() const {
  ParamList out;
  text_.collect(out, "text.");
  backbone_.collect(out, "backbone.");
  for (std::size_t i = 0; i < sfm_.size(); ++i) {
    sfm_[i].collect(out, "sfm" + std::to_string(i + 2) + ".");
  }
  if (hcam_) hcam_->collect(out, "hcam.");
  if (merge_w_.defined()) {
    out.push_back({"merge.w", merge_w_, ParamRole::kWeight});
    out.push_back({"merge.b", merge_b_, ParamRole::kNoDecay});
  }
  decoder_.collect(out, "decoder.");
  return out;
}

}  // namespace shnet
