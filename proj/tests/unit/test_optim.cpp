#include <gtest/gtest.h>

#include <cmath>

#include "shnet/ops.hpp"
#include "shnet/optim.hpp"

using namespace shnet;

TEST(PolyLr, ClosedFormValues) {
  EXPECT_EQ(poly_lr(1.2e-4, 0, 3000, 0.7), 1.2e-4);
  EXPECT_NEAR(poly_lr(1.2e-4, 1500, 3000, 0.7), 1.2e-4 * std::pow(0.5, 0.7), 1e-18);
  EXPECT_NEAR(poly_lr(1.2e-4, 1500, 3000, 0.7), 7.39e-5, 5e-8);
  EXPECT_EQ(poly_lr(1.2e-4, 3000, 3000, 0.7), 0.0);
  EXPECT_EQ(poly_lr(1.2e-4, 4000, 3000, 0.7), 0.0);
  for (std::size_t t = 0; t < 3000; t += 37) {
    const double expected = 1.2e-4 * std::pow(1.0 - static_cast<double>(t) / 3000.0, 0.7);
    EXPECT_NEAR(poly_lr(1.2e-4, t, 3000, 0.7), expected, 1e-15);
  }
}

TEST(PolyLr, MonotoneNonIncreasing) {
  double prev = poly_lr(1.0, 0, 100, 0.7);
  for (std::size_t t = 1; t <= 100; ++t) {
    const double lr = poly_lr(1.0, t, 100, 0.7);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

namespace {

struct HandAdam {
  double p, m = 0, v = 0;
  int t = 0;
  void step(double g, double lr, double wd, bool decay) {
    ++t;
    if (decay) p = p - lr * wd * p;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    p = p - lr * mh / (std::sqrt(vh) + 1e-8);
  }
};

}  // namespace

TEST(AdamW, QuadraticMatchesHandSteppedOracle) {
  // f(p) = 0.5 * a * (p - c)^2, gradient a * (p - c).
  const double a = 3.0, c = -1.5, lr = 0.05, wd = 0.01;
  for (ParamRole role : {ParamRole::kWeight, ParamRole::kNoDecay}) {
    Tensor p = Tensor::from({1}, {2.0}, true);
    AdamW opt({{"p", p, role}}, {0.9, 0.999, 1e-8, wd});
    HandAdam hand{2.0};
    for (int k = 0; k < 50; ++k) {
      p.zero_grad();
      Tensor d = ops::add_scalar(p, -c);
      backward(ops::scale(ops::mul(d, d), 0.5 * a));
      const double g = a * (hand.p - c);
      EXPECT_NEAR(p.grad()[0], g, 1e-12);
      opt.step(lr);
      hand.step(g, lr, wd, role == ParamRole::kWeight);
      EXPECT_NEAR(p.at(0), hand.p, 1e-12) << "step " << k;
    }
    EXPECT_EQ(opt.steps(), 50u);
    EXPECT_NEAR(opt.first_moment(0)[0], hand.m, 1e-12);
    EXPECT_NEAR(opt.second_moment(0)[0], hand.v, 1e-12);
  }
}

TEST(AdamW, PadRowOfEmbeddingNeverMoves) {
  Tensor table = Tensor::from({3, 2}, {0.5, -0.5, 1, 2, 3, 4}, true);
  AdamW opt({{"emb", table, ParamRole::kEmbedding}}, {0.9, 0.999, 1e-8, 0.5});
  for (int k = 0; k < 5; ++k) {
    table.zero_grad();
    backward(ops::sum(ops::gather_rows(table, {1, 2})));
    opt.step(0.1);
  }
  EXPECT_EQ(table.at(0), 0.5);
  EXPECT_EQ(table.at(1), -0.5);
  EXPECT_NE(table.at(2), 1.0);
}

TEST(AdamW, DecayDependsOnRole) {
  // Zero gradient isolates the decay term: Adam's update is exactly zero.
  Tensor w = Tensor::from({2}, {1.0, -2.0}, true), b = Tensor::from({2}, {1.0, -2.0}, true);
  Tensor emb = Tensor::from({2, 1}, {4.0, 4.0}, true);
  for (Tensor* t : {&w, &b, &emb}) t->mutable_grad();
  AdamW opt({{"w", w, ParamRole::kWeight}, {"b", b, ParamRole::kNoDecay}, {"e", emb, ParamRole::kEmbedding}},
            {0.9, 0.999, 1e-8, 0.1});
  opt.step(0.5);
  EXPECT_DOUBLE_EQ(w.at(0), 1.0 * (1 - 0.05));
  EXPECT_DOUBLE_EQ(w.at(1), -2.0 * (1 - 0.05));
  EXPECT_EQ(b.at(0), 1.0);
  EXPECT_EQ(emb.at(0), 4.0);
  EXPECT_DOUBLE_EQ(emb.at(1), 4.0 * (1 - 0.05));
}

TEST(AdamW, SkipsFrozenAndGradlessParams) {
  Tensor frozen = Tensor::from({1}, {1.0});
  Tensor untouched = Tensor::from({1}, {2.0}, true);
  AdamW opt({{"f", frozen, ParamRole::kWeight}, {"u", untouched, ParamRole::kWeight}});
  opt.step(1.0);
  EXPECT_EQ(frozen.at(0), 1.0);
  EXPECT_EQ(untouched.at(0), 2.0);
  EXPECT_EQ(opt.first_moment(1)[0], 0.0);
}
