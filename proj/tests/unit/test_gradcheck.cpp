#include <gtest/gtest.h>

#include <set>

#include "shnet/gradcheck.hpp"
#include "shnet/ops.hpp"

using namespace shnet;

namespace {

// y = x^3 with a backward that forgets the factor 3.
Tensor broken_cube(const Tensor& x) {
  std::vector<double> y(x.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x.at(i) * x.at(i) * x.at(i);
  Tensor xin = x;
  return make_result(x.shape(), std::move(y), "broken_cube", {x}, [xin](const detail::TensorImpl& out) mutable {
    auto g = xin.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * xin.at(i) * xin.at(i);
  });
}

Tensor weighted_sum(const Tensor& y) {
  std::vector<double> w(y.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 + 0.25 * static_cast<double>(i);
  return ops::sum(ops::mul(y, Tensor::from(y.shape(), std::move(w))));
}

}  // namespace

TEST(CheckGradients, AcceptsCorrectBackward) {
  std::mt19937_64 rng(0);
  Tensor x = Tensor::from({4}, {0.3, -1.2, 0.7, 2.0}, true);
  Tensor w = Tensor::from({4, 3}, {0.1, 0.2, -0.3, 0.4, 0.5, 0.6, -0.7, 0.8, 0.9, 1.0, -1.1, 1.2}, true);
  auto f = [&] { return weighted_sum(ops::tanh(ops::matmul(ops::reshape(ops::mul(x, x), {1, 4}), w))); };
  const check::CheckStats s = check::check_gradients(f, {x, w}, {}, rng);
  EXPECT_EQ(s.probed, 16u);
  EXPECT_LE(s.max_rel_error, 1e-5);
}

TEST(CheckGradients, CatchesBrokenBackward) {
  std::mt19937_64 rng(1);
  Tensor x = Tensor::from({3}, {0.5, -0.8, 1.3}, true);
  const check::CheckStats s = check::check_gradients([&] { return weighted_sum(broken_cube(x)); }, {x}, {}, rng);
  EXPECT_GT(s.max_rel_error, 0.5);
}

TEST(CheckGradients, ReluKinkIsDetectedNotCounted) {
  std::mt19937_64 rng(2);
  Tensor x = Tensor::from({2}, {0.0, 1.0}, true);
  const check::CheckStats s = check::check_gradients([&] { return weighted_sum(ops::relu(x)); }, {x}, {}, rng);
  EXPECT_EQ(s.kinks, 1u);
  EXPECT_LE(s.max_rel_error, 1e-8);
}

TEST(RunGradcheck, CoversEveryModule) {
  const auto& modules = check::gradcheck_modules();
  const std::set<std::string> expected{"tensor-core", "text-encoder", "visual-backbone", "sfm",
                                       "hcam", "decoder-loss", "model"};
  EXPECT_EQ(std::set<std::string>(modules.begin(), modules.end()), expected);
  check::GradcheckOptions opt;
  opt.configs = 2;
  const auto results = check::run_gradcheck({"sfm", "hcam"}, opt);
  std::set<std::string> seen;
  for (const auto& r : results) {
    seen.insert(r.module);
    EXPECT_TRUE(r.passed) << r.name << " " << r.max_rel_error;
    EXPECT_EQ(r.configs, 2u);
  }
  EXPECT_EQ(seen, (std::set<std::string>{"sfm", "hcam"}));
  const std::string table = check::format_table(results);
  for (const auto& r : results) EXPECT_NE(table.find(r.name), std::string::npos);
  EXPECT_THROW(check::run_gradcheck({"nope"}), UsageError);
}
