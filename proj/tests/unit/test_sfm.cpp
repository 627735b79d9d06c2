#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "shnet/ops.hpp"
#include "shnet/sfm.hpp"

using namespace shnet;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool rg = false) {
  std::uniform_real_distribution<double> d(-1, 1);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = d(rng);
  return Tensor::from(std::move(shape), std::move(v), rg);
}

}  // namespace

TEST(FuseTokens, LengthSplitAndPixelOrder) {
  std::mt19937_64 rng(0);
  Tensor v = random_tensor({3, 2, 2}, rng), l = random_tensor({3, 4}, rng);
  MultiModalSequence seq = fuse_tokens(v, l, Tensor::full({3}, 1.0), Tensor::zeros({3}),
                                       Tensor::zeros({3, 4}), Tensor::zeros({3, 25}));
  EXPECT_EQ(seq.length(), 8u);
  EXPECT_EQ(seq.split, 4u);
  EXPECT_EQ(seq.words(), 4u);

  // Column k < split is pixel (k / W, k % W) of the normalized map.
  const auto expected = oracle::layer_norm_columns(
      values(ops::concat({ops::reshape(v, {3, 4}), l}, 1)), {1, 1, 1}, {0, 0, 0}, 3, 8, 1e-5);
  EXPECT_LE(oracle::max_abs_diff(values(seq.tokens), expected), 1e-12);
  Tensor back = visual_part(seq);
  ASSERT_EQ(back.shape(), (Shape{3, 2, 2}));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t k = 0; k < 4; ++k)
      EXPECT_EQ(back.at(c * 4 + (k / 2) * 2 + k % 2), seq.tokens.at(c * 8 + k));
  EXPECT_EQ(values(word_part(seq)), values(ops::slice(seq.tokens, 1, 4, 4)));
}

TEST(FuseTokens, AddsPositionsAfterNormalization) {
  std::mt19937_64 rng(1);
  Tensor v = random_tensor({4, 2, 3}, rng), l = random_tensor({4, 2}, rng);
  Tensor g = random_tensor({4}, rng), b = random_tensor({4}, rng);
  Tensor pv = random_tensor({4, 6}, rng), pl = random_tensor({4, 5}, rng);
  MultiModalSequence seq = fuse_tokens(v, l, g, b, pv, pl);
  auto expected = oracle::layer_norm_columns(values(ops::concat({ops::reshape(v, {4, 6}), l}, 1)),
                                             values(g), values(b), 4, 8, 1e-5);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t k = 0; k < 6; ++k) expected[c * 8 + k] += pv.at(c * 6 + k);
    for (std::size_t k = 0; k < 2; ++k) expected[c * 8 + 6 + k] += pl.at(c * 5 + k);
  }
  EXPECT_LE(oracle::max_abs_diff(values(seq.tokens), expected), 1e-12);
}

TEST(FuseTokens, ShapeErrors) {
  EXPECT_THROW(fuse_tokens(Tensor::zeros({3, 2, 2}), Tensor::zeros({4, 2}), Tensor::zeros({3}),
                           Tensor::zeros({3}), Tensor::zeros({3, 4}), Tensor::zeros({3, 25})),
               ShapeError);
  EXPECT_THROW(fuse_tokens(Tensor::zeros({3, 2, 2}), Tensor::zeros({3, 26}), Tensor::zeros({3}),
                           Tensor::zeros({3}), Tensor::zeros({3, 4}), Tensor::zeros({3, 25})),
               ShapeError);
}

TEST(Attention, ZeroQueryKeyGivesUniformMixing) {
  std::mt19937_64 rng(2);
  const std::size_t c = 3, s = 5;
  Tensor x = random_tensor({c, s}, rng);
  Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  AttentionParams p{1, Tensor::zeros({c, c}), Tensor::zeros({c, c}), eye, eye};
  Tensor y = multi_head_attention(x, p);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean = 0;
    for (std::size_t j = 0; j < s; ++j) mean += x.at(ch * s + j) / s;
    for (std::size_t i = 0; i < s; ++i) EXPECT_NEAR(y.at(ch * s + i), x.at(ch * s + i) + mean, 1e-12);
  }
}

TEST(Attention, TwoHeadsMatchHandUnrolledOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t c = 4, s = 3;
    Tensor x = random_tensor({c, s}, rng);
    AttentionParams p{2, random_tensor({c, c}, rng), random_tensor({c, c}, rng),
                      random_tensor({c, c}, rng), random_tensor({c, c}, rng)};
    for (bool residual : {true, false}) {
      AttentionOptions opt;
      opt.residual = residual;
      Tensor y = multi_head_attention(x, p, opt);
      const auto expected = oracle::attention(values(x), values(p.w_query), values(p.w_key),
                                              values(p.w_value), values(p.w_output), c, s, 2, residual);
      EXPECT_LE(oracle::max_abs_diff(values(y), expected), 1e-10);
    }
  }
}

TEST(Attention, MapsAreRowStochastic) {
  std::mt19937_64 rng(4);
  const std::size_t c = 8, s = 11;
  AttentionParams p{4, random_tensor({c, c}, rng), random_tensor({c, c}, rng),
                    random_tensor({c, c}, rng), random_tensor({c, c}, rng)};
  std::vector<Tensor> maps;
  AttentionOptions opt;
  opt.attention_maps = &maps;
  multi_head_attention(ops::scale(random_tensor({c, s}, rng), 3.0), p, opt);
  ASSERT_EQ(maps.size(), 4u);
  for (const Tensor& a : maps) {
    ASSERT_EQ(a.shape(), (Shape{s, s}));
    for (std::size_t i = 0; i < s; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < s; ++j) {
        EXPECT_GE(a.at(i * s + j), 0.0);
        row += a.at(i * s + j);
      }
      EXPECT_NEAR(row, 1.0, 1e-10);
    }
  }
}

TEST(Attention, SelfOnlyHookReducesToPerTokenProjection) {
  std::mt19937_64 rng(5);
  const std::size_t c = 4, s = 6;
  Tensor x = random_tensor({c, s}, rng);
  AttentionParams p{2, random_tensor({c, c}, rng), random_tensor({c, c}, rng),
                    random_tensor({c, c}, rng), random_tensor({c, c}, rng)};
  AttentionOptions opt;
  opt.self_only = true;
  opt.residual = false;
  Tensor y = multi_head_attention(x, p, opt);
  const auto expected = oracle::matmul(values(p.w_output),
                                       oracle::matmul(values(p.w_value), values(x), c, c, s), c, c, s);
  EXPECT_LE(oracle::max_abs_diff(values(y), expected), 1e-12);
}

TEST(Attention, HeadsMustDivideChannels) {
  AttentionParams p{3, Tensor::zeros({4, 4}), Tensor::zeros({4, 4}), Tensor::zeros({4, 4}),
                    Tensor::zeros({4, 4})};
  EXPECT_THROW(multi_head_attention(Tensor::zeros({4, 2}), p), UsageError);
}

TEST(SfmLevel, LevelsAreIndependent) {
  std::mt19937_64 rng(6);
  Initializer init(7);
  SfmConfig cfg{8, 2, 25, 2, true, true};
  SfmLevel level2(cfg, init), level3(cfg, init);
  Tensor v = random_tensor({8, 2, 2}, rng), l = random_tensor({8, 3}, rng);
  const auto before = values(level3.forward(v, l).tokens);
  for (double& w : level2.attention.w_query.mutable_data()) w += 0.5;
  for (double& w : level2.pos_visual.mutable_data()) w -= 0.25;
  level2.forward(v, l);
  EXPECT_EQ(values(level3.forward(v, l).tokens), before);
}

TEST(SfmLevel, ShapesAndFrozenPositions) {
  std::mt19937_64 rng(8);
  Initializer init(9);
  SfmLevel with(SfmConfig{8, 2, 25, 2, true, true}, init);
  SfmLevel without(SfmConfig{8, 2, 25, 2, true, false}, init);
  Tensor v = random_tensor({8, 2, 2}, rng), l = random_tensor({8, 3}, rng);
  MultiModalSequence seq = with.forward(v, l);
  EXPECT_EQ(visual_part(seq).shape(), v.shape());
  EXPECT_EQ(word_part(seq).shape(), l.shape());
  EXPECT_FALSE(without.pos_visual.requires_grad());
  for (double p : without.pos_words.data()) EXPECT_EQ(p, 0.0);
  EXPECT_TRUE(with.pos_visual.requires_grad());
}
