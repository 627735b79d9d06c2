#include "shnet/sfm.hpp"

#include <cmath>
#include <limits>

#include "shnet/ops.hpp"

namespace shnet {

MultiModalSequence fuse_tokens(const Tensor& visual, const Tensor& words,
                               const Tensor& ln_gamma, const Tensor& ln_beta,
                               const Tensor& pos_visual,
                               const Tensor& pos_words) {
  if (visual.rank() != 3 || words.rank() != 2 || visual.dim(0) != words.dim(0)) {
    throw ShapeError("fuse_tokens: visual " + shape_str(visual.shape()) +
                     " and words " + shape_str(words.shape()) +
                     " must share the channel extent");
  }
  const std::size_t c = visual.dim(0), h = visual.dim(1), w = visual.dim(2);
  const std::size_t t = words.dim(1);
  if (pos_visual.shape() != Shape{c, h * w} || pos_words.rank() != 2 ||
      pos_words.dim(0) != c || pos_words.dim(1) < t) {
    throw ShapeError("fuse_tokens: positional embeddings " +
                     shape_str(pos_visual.shape()) + "/" +
                     shape_str(pos_words.shape()) + " do not cover " +
                     std::to_string(h * w) + " pixels and " +
                     std::to_string(t) + " words");
  }
  Tensor joint = ops::concat({ops::reshape(visual, {c, h * w}), words}, 1);
  Tensor normed = ops::layer_norm(joint, ln_gamma, ln_beta, 1e-5);
  Tensor positions =
      ops::concat({pos_visual, ops::slice(pos_words, 1, 0, t)}, 1);
  MultiModalSequence seq;
  seq.tokens = ops::add(normed, positions);
  seq.split = h * w;
  seq.height = h;
  seq.width = w;
  return seq;
}

Tensor multi_head_attention(const Tensor& x, const AttentionParams& params,
                            const AttentionOptions& options) {
  const std::size_t c = x.dim(0), s = x.dim(1);
  if (params.heads == 0 || c % params.heads != 0) {
    throw UsageError("multi_head_attention: " + std::to_string(c) +
                     " channels not divisible by " +
                     std::to_string(params.heads) + " heads");
  }
  const std::size_t d = c / params.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor q = ops::matmul(params.w_query, x);
  Tensor k = ops::matmul(params.w_key, x);
  Tensor v = ops::matmul(params.w_value, x);

  Tensor mask;
  if (options.self_only) {
    std::vector<double> m(s * s, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < s; ++i) m[i * s + i] = 0.0;
    mask = Tensor::from({s, s}, std::move(m));
  }

  std::vector<Tensor> heads;
  heads.reserve(params.heads);
  for (std::size_t hd = 0; hd < params.heads; ++hd) {
    Tensor qh = ops::slice(q, 0, hd * d, d);
    Tensor kh = ops::slice(k, 0, hd * d, d);
    Tensor vh = ops::slice(v, 0, hd * d, d);
    Tensor logits = ops::scale(ops::matmul(ops::transpose(qh), kh), inv_sqrt);
    if (mask.defined()) logits = ops::add(logits, mask);
    Tensor attn = ops::softmax(logits);  // row = query, column = key
    if (options.attention_maps) options.attention_maps->push_back(attn);
    heads.push_back(ops::matmul(vh, ops::transpose(attn)));
  }
  Tensor merged = params.heads == 1 ? heads.front() : ops::concat(heads, 0);
  Tensor out = ops::matmul(params.w_output, merged);
  return options.residual ? ops::add(out, x) : out;
}

SfmLevel::SfmLevel(const SfmConfig& config, Initializer& init)
    : config_(config) {
  const std::size_t c = config.channels;
  const std::size_t hw = config.feature_size * config.feature_size;
  ln_gamma = init.ones({c});
  ln_beta = init.zeros({c});
  if (config.positional) {
    pos_visual = init.normal({c, hw}, 0.02);
    pos_words = init.normal({c, config.max_words}, 0.02);
  } else {
    pos_visual = Tensor::zeros({c, hw});
    pos_words = Tensor::zeros({c, config.max_words});
  }
  attention.heads = config.heads;
  attention.w_query = init.xavier({c, c}, c, c);
  attention.w_key = init.xavier({c, c}, c, c);
  attention.w_value = init.xavier({c, c}, c, c);
  attention.w_output = init.xavier({c, c}, c, c);
}

MultiModalSequence SfmLevel::forward(const Tensor& visual, const Tensor& words,
                                     const AttentionOptions& options) const {
  MultiModalSequence seq =
      fuse_tokens(visual, words, ln_gamma, ln_beta, pos_visual, pos_words);
  AttentionOptions opts = options;
  opts.residual = config_.residual;
  seq.tokens = multi_head_attention(seq.tokens, attention, opts);
  return seq;
}

void SfmLevel::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "ln.gamma", ln_gamma, ParamRole::kNoDecay});
  out.push_back({prefix + "ln.beta", ln_beta, ParamRole::kNoDecay});
  out.push_back({prefix + "pos_visual", pos_visual, ParamRole::kNoDecay});
  out.push_back({prefix + "pos_words", pos_words, ParamRole::kNoDecay});
  out.push_back({prefix + "w_query", attention.w_query, ParamRole::kWeight});
  out.push_back({prefix + "w_key", attention.w_key, ParamRole::kWeight});
  out.push_back({prefix + "w_value", attention.w_value, ParamRole::kWeight});
  out.push_back({prefix + "w_output", attention.w_output, ParamRole::kWeight});
}

Tensor visual_part(const MultiModalSequence& seq) {
  const std::size_t c = seq.tokens.dim(0);
  return ops::reshape(ops::slice(seq.tokens, 1, 0, seq.split),
                      {c, seq.height, seq.width});
}

Tensor word_part(const MultiModalSequence& seq) {
  return ops::slice(seq.tokens, 1, seq.split, seq.words());
}

}  // namespace shnet
