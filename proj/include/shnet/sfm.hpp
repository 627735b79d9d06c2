#pragma once

#include <string>
#include <vector>

#include "shnet/params.hpp"
#include "shnet/tensor.hpp"

namespace shnet {

/// Joint token matrix [C x (HW + T)]; columns [0, split) are pixels in
/// row-major order, the rest are words.
struct MultiModalSequence {
  Tensor tokens;
  std::size_t split = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t length() const { return tokens.dim(1); }
  std::size_t words() const { return length() - split; }
};

struct AttentionParams {
  std::size_t heads = 4;
  // Rows [h*d, (h+1)*d) of each projection belong to head h, d = C / heads.
  Tensor w_query;   // [C x C]
  Tensor w_key;     // [C x C]
  Tensor w_value;   // [C x C]
  Tensor w_output;  // [C x C]
};

struct AttentionOptions {
  bool residual = true;
  /// Test hook: off-diagonal logits set to -inf, so each token attends only
  /// to itself.
  bool self_only = false;
  /// When set, receives one [S x S] row-stochastic matrix per head.
  std::vector<Tensor>* attention_maps = nullptr;
};

/// Flatten V row-major, concatenate with L along the token axis, layer-norm
/// each token over channels, then add [P_v, P_l[:, :T]].
MultiModalSequence fuse_tokens(const Tensor& visual, const Tensor& words,
                               const Tensor& ln_gamma, const Tensor& ln_beta,
                               const Tensor& pos_visual, const Tensor& pos_words);

/// Full self-attention over every token of the sequence. Per head,
/// A = softmax(Q^T K / sqrt(C/h)); heads are concatenated and projected by
/// W_O, and X is added back when options.residual is set.
Tensor multi_head_attention(const Tensor& x, const AttentionParams& params,
                            const AttentionOptions& options = {});

struct SfmConfig {
  std::size_t channels = 64;
  std::size_t feature_size = 8;
  std::size_t max_words = 25;
  std::size_t heads = 4;
  bool residual = true;
  bool positional = true;  // false: P_v, P_l are zero and frozen
};

/// One fusion block (layer norm, positional embeddings, attention) for a
/// single hierarchy level.
class SfmLevel {
 public:
  SfmLevel(const SfmConfig& config, Initializer& init);

  MultiModalSequence forward(const Tensor& visual, const Tensor& words,
                             const AttentionOptions& options = {}) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor ln_gamma;
  Tensor ln_beta;
  Tensor pos_visual;  // [C x HW]
  Tensor pos_words;   // [C x T_max]
  AttentionParams attention;

 private:
  SfmConfig config_;
};

/// Visual part of a fused sequence, reshaped to [C x H x W].
Tensor visual_part(const MultiModalSequence& seq);
/// Linguistic part, [C x T].
Tensor word_part(const MultiModalSequence& seq);

}  // namespace shnet
