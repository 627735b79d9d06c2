#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "json.hpp"
#include "oracles.hpp"
#include "shnet/image_io.hpp"
#include "shnet/metrics.hpp"
#include "temp_dir.hpp"

using namespace shnet;

namespace {

Tensor mask_from(const std::vector<int>& bits, std::size_t h, std::size_t w) {
  std::vector<double> v(bits.begin(), bits.end());
  return Tensor::from({1, h, w}, std::move(v));
}

std::vector<int> random_bits(std::mt19937_64& rng, std::size_t n, double density) {
  std::bernoulli_distribution d(density);
  std::vector<int> bits(n);
  for (auto& b : bits) b = d(rng) ? 1 : 0;
  return bits;
}

}  // namespace

TEST(SampleIou, HandCases) {
  std::vector<int> a{1, 1, 0, 0}, none{0, 0, 0, 0};
  EvalAccumulator acc;
  acc.accumulate(mask_from(a, 2, 2), mask_from(a, 2, 2));
  EXPECT_EQ(acc.sample_ious().back(), 1.0);
  acc.accumulate(mask_from(a, 2, 2), mask_from({0, 0, 1, 1}, 2, 2));
  EXPECT_EQ(acc.sample_ious().back(), 0.0);
  acc.accumulate(mask_from(none, 2, 2), mask_from(none, 2, 2));
  EXPECT_EQ(acc.sample_ious().back(), 1.0);
  acc.accumulate(mask_from(none, 2, 2), mask_from(a, 2, 2));
  EXPECT_EQ(acc.sample_ious().back(), 0.0);

  // pred 6 px, gt 4 px, overlap 3.
  std::vector<int> pred{1, 1, 1, 1, 1, 1, 0, 0, 0}, gt{0, 0, 0, 1, 1, 1, 1, 0, 0};
  EvalAccumulator one;
  one.accumulate(mask_from(pred, 3, 3), mask_from(gt, 3, 3));
  EXPECT_EQ(one.sample_ious().back(), 3.0 / 7.0);
  EXPECT_EQ(one.overall_iou(), 3.0 / 7.0);
}

TEST(Precision, TwoSamplesAndPerfectPredictions) {
  EvalAccumulator acc;
  std::vector<int> pred{1, 1, 1, 1, 1, 1, 0, 0, 0}, gt{0, 0, 0, 1, 1, 1, 1, 0, 0};
  acc.accumulate(mask_from(pred, 3, 3), mask_from(gt, 3, 3));
  acc.accumulate(mask_from(gt, 3, 3), mask_from(gt, 3, 3));
  EXPECT_EQ(acc.precision_at(0.5), 50.0);
  EXPECT_EQ(acc.precision_at(0.4), 100.0);

  EvalAccumulator perfect;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 5; ++i) {
    auto m = random_bits(rng, 20, 0.4);
    perfect.accumulate(mask_from(m, 4, 5), mask_from(m, 4, 5));
  }
  EvalReport r = EvalReport::from(perfect);
  EXPECT_EQ(r.overall_iou, 1.0);
  for (double p : r.precision) EXPECT_EQ(p, 100.0);
}

TEST(Precision, StrictlyGreaterThanThreshold) {
  EvalAccumulator acc;
  acc.accumulate_counts(1, 2, 0.5);
  EXPECT_EQ(acc.precision_at(0.5), 0.0);
}

TEST(Metrics, HundredRandomPairsMatchBruteForce) {
  std::mt19937_64 rng(2);
  EvalAccumulator acc;
  std::uint64_t inter = 0, uni = 0;
  std::vector<double> ious;
  for (int k = 0; k < 100; ++k) {
    const std::size_t h = 1 + rng() % 12, w = 1 + rng() % 12;
    const double density = std::uniform_real_distribution<double>(0, 1)(rng);
    auto pred = random_bits(rng, h * w, density), gt = random_bits(rng, h * w, density);
    acc.accumulate(mask_from(pred, h, w), mask_from(gt, h, w));
    const oracle::MaskCounts c = oracle::count_pixels(pred, gt);
    inter += c.intersection;
    uni += c.uni;
    ious.push_back(c.uni == 0 ? 1.0 : static_cast<double>(c.intersection) / static_cast<double>(c.uni));
    EXPECT_EQ(acc.sample_ious().back(), ious.back());
  }
  EXPECT_EQ(acc.total_intersection(), inter);
  EXPECT_EQ(acc.total_union(), uni);
  EXPECT_EQ(acc.overall_iou(), static_cast<double>(inter) / static_cast<double>(uni));
  for (double t : kPrecisionThresholds) {
    std::size_t above = 0;
    for (double v : ious) above += v > t ? 1 : 0;
    EXPECT_EQ(acc.precision_at(t), 100.0 * static_cast<double>(above) / 100.0);
  }
}

TEST(Metrics, PrecisionIsMonotoneInThreshold) {
  std::mt19937_64 rng(3);
  EvalAccumulator acc;
  for (int k = 0; k < 50; ++k) {
    auto p = random_bits(rng, 36, 0.5), g = random_bits(rng, 36, 0.5);
    acc.accumulate(mask_from(p, 6, 6), mask_from(g, 6, 6));
  }
  EvalReport r = EvalReport::from(acc);
  for (std::size_t i = 1; i < r.precision.size(); ++i) EXPECT_LE(r.precision[i], r.precision[i - 1]);
}

TEST(Metrics, OrderAndShardingInvariant) {
  std::mt19937_64 rng(4);
  std::vector<std::pair<Tensor, Tensor>> pairs;
  for (int k = 0; k < 30; ++k)
    pairs.emplace_back(mask_from(random_bits(rng, 16, 0.3), 4, 4), mask_from(random_bits(rng, 16, 0.6), 4, 4));
  EvalAccumulator forward, shard_a, shard_b, reversed;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    forward.accumulate(pairs[i].first, pairs[i].second);
    (i % 2 ? shard_a : shard_b).accumulate(pairs[i].first, pairs[i].second);
  }
  for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) reversed.accumulate(it->first, it->second);
  shard_a.merge(shard_b);
  for (EvalAccumulator* other : {&shard_a, &reversed}) {
    EXPECT_EQ(other->overall_iou(), forward.overall_iou());
    for (double t : kPrecisionThresholds) EXPECT_EQ(other->precision_at(t), forward.precision_at(t));
  }
}

TEST(Metrics, ErrorsOnBadInput) {
  EvalAccumulator acc;
  EXPECT_THROW(acc.overall_iou(), UsageError);
  EXPECT_THROW(acc.precision_at(0.5), UsageError);
  EXPECT_THROW(acc.accumulate(Tensor::zeros({1, 2, 2}), Tensor::zeros({1, 2, 3})), UsageError);
  EXPECT_THROW(acc.accumulate(Tensor::full({1, 2, 2}, 0.5), Tensor::zeros({1, 2, 2})), UsageError);
}

TEST(Metrics, BinarizeIsStrict) {
  Tensor b = binarize(Tensor::from({4}, {0.2, 0.5, 0.5000001, 1.0}));
  EXPECT_EQ(std::vector<double>(b.data().begin(), b.data().end()), (std::vector<double>{0, 0, 1, 1}));
}

TEST(Report, TextAndJsonCarryEveryMetric) {
  EvalAccumulator acc;
  acc.accumulate_counts(3, 7, 3.0 / 7.0);
  acc.accumulate_counts(4, 4, 1.0);
  EvalReport r = EvalReport::from(acc);
  const std::string text = r.to_text();
  EXPECT_EQ(text.rfind("overall_iou=", 0), 0u);
  for (const char* key : {"prec@0.5=", "prec@0.6=", "prec@0.7=", "prec@0.8=", "prec@0.9="})
    EXPECT_NE(text.find(key), std::string::npos) << key;
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_DOUBLE_EQ(j.at("overall_iou").get<double>(), 7.0 / 11.0);
  EXPECT_EQ(j.at("samples").get<std::size_t>(), 2u);
}

TEST(ImageIo, NetpbmRoundTripAndErrors) {
  testutil::TempDir dir;
  Image8 rgb{3, 2, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18}};
  write_ppm(dir / "a.ppm", rgb);
  Image8 back = read_image(dir / "a.ppm");
  EXPECT_EQ(back.width, 3u);
  EXPECT_EQ(back.height, 2u);
  EXPECT_EQ(back.channels, 3u);
  EXPECT_EQ(back.pixels, rgb.pixels);
  Tensor t = image_to_tensor(back);
  ASSERT_EQ(t.shape(), (Shape{3, 2, 3}));
  EXPECT_DOUBLE_EQ(t.at(0), 1.0 / 255.0);
  EXPECT_DOUBLE_EQ(t.at(6), 2.0 / 255.0);  // channel 1, first pixel
  EXPECT_EQ(tensor_to_image(t).pixels, rgb.pixels);

  Image8 gray{2, 1, 1, {0, 200}};
  write_pgm(dir / "m.pgm", gray);
  Tensor m = mask_to_tensor(read_image(dir / "m.pgm"));
  EXPECT_EQ(m.at(0), 0.0);
  EXPECT_EQ(m.at(1), 1.0);

  EXPECT_THROW(read_image(dir / "missing.ppm"), ImageError);
  std::ofstream(dir / "junk.ppm") << "XX";
  EXPECT_THROW(read_image(dir / "junk.ppm"), ImageError);
  std::ofstream(dir / "short.ppm") << "P6 4 4 255\n" << "abc";
  EXPECT_THROW(read_image(dir / "short.ppm"), ImageError);
}
