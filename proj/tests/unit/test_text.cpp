#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "shnet/ops.hpp"
#include "shnet/text_encoder.hpp"
#include "temp_dir.hpp"

using namespace shnet;

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(tokenize("The  RED circle, left-of  it!"),
            (std::vector<std::string>{"the", "red", "circle", "left", "of", "it"}));
  EXPECT_TRUE(tokenize("  ...  ").empty());
}

TEST(Vocabulary, ReservedIndicesAndUnknowns) {
  Vocabulary v({"red", "circle", "red"});
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.index("red"), 2u);
  EXPECT_EQ(v.index("circle"), 3u);
  EXPECT_EQ(v.index("zebra"), Vocabulary::kUnk);
  EXPECT_EQ(v.encode({"circle", "zebra"}), (std::vector<std::size_t>{3, 1}));
  EXPECT_EQ(v.token(Vocabulary::kPad), "<pad>");
  EXPECT_THROW(v.token(99), UsageError);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  testutil::TempDir dir;
  Vocabulary v({"a", "bb", "ccc"});
  v.save(dir / "vocab.txt");
  Vocabulary w = Vocabulary::load(dir / "vocab.txt");
  ASSERT_EQ(w.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(w.token(i), v.token(i));
  EXPECT_THROW(Vocabulary::load(dir / "missing.txt"), FormatError);
}

TEST(Embeddings, FileRowsCopiedExactlyOthersSeeded) {
  testutil::TempDir dir;
  {
    std::ofstream f(dir / "vec.txt");
    f << "red 0.5 -1.25 3\n"
      << "circle 1e-3 2 0.125\n"
      << "notinvocab 9 9 9\n";
  }
  Vocabulary v({"red", "circle", "square"});
  EmbeddingTable t = load_embeddings(dir / "vec.txt", v, 7, 42);
  EXPECT_EQ(t.loaded_rows, 2u);
  ASSERT_EQ(t.table.shape(), (Shape{5, 3}));
  const auto d = t.table.data();
  EXPECT_EQ(d[2 * 3 + 0], 0.5);
  EXPECT_EQ(d[2 * 3 + 1], -1.25);
  EXPECT_EQ(d[2 * 3 + 2], 3.0);
  EXPECT_EQ(d[3 * 3 + 0], 1e-3);
  EXPECT_EQ(d[3 * 3 + 2], 0.125);

  EmbeddingTable again = load_embeddings(dir / "vec.txt", v, 7, 42);
  EXPECT_TRUE(std::equal(d.begin(), d.end(), again.table.data().begin()));
  EmbeddingTable other = load_embeddings(dir / "vec.txt", v, 7, 43);
  EXPECT_NE(d[4 * 3], other.table.data()[4 * 3]);
}

TEST(Embeddings, EmptyFileGivesRandomTable) {
  testutil::TempDir dir;
  std::ofstream(dir / "empty.txt").close();
  Vocabulary v({"red"});
  EmbeddingTable t = load_embeddings(dir / "empty.txt", v, 4, 1);
  EXPECT_EQ(t.loaded_rows, 0u);
  EXPECT_EQ(t.table.shape(), (Shape{3, 4}));
  EmbeddingTable r = random_embeddings(v, 4, 1);
  EXPECT_TRUE(std::equal(t.table.data().begin(), t.table.data().end(), r.table.data().begin()));
}

TEST(Embeddings, MalformedFilesReportLine) {
  testutil::TempDir dir;
  Vocabulary v({"red"});
  std::ofstream(dir / "bad.txt") << "red 1 2\nblue 1 x\n";
  try {
    load_embeddings(dir / "bad.txt", v, 2, 0);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  std::ofstream(dir / "ragged.txt") << "red 1 2\nblue 1\n";
  EXPECT_THROW(load_embeddings(dir / "ragged.txt", v, 2, 0), FormatError);
  std::ofstream(dir / "novec.txt") << "red\n";
  EXPECT_THROW(load_embeddings(dir / "novec.txt", v, 2, 0), FormatError);
  EXPECT_THROW(load_embeddings(dir / "absent.txt", v, 2, 0), FormatError);
}

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Lstm, TwoUnitCellMatchesScalarGateEquations) {
  Initializer init(0);
  LstmEncoder lstm(2, 2, init);
  // Fixed weights: w_input [8 x 2], w_hidden [8 x 2], bias [8 x 1].
  std::vector<double> wi(16), wh(16), b(8);
  for (std::size_t k = 0; k < 16; ++k) {
    wi[k] = 0.1 * static_cast<double>(k % 5) - 0.2;
    wh[k] = 0.05 * static_cast<double>((k * 3) % 7) - 0.15;
  }
  for (std::size_t k = 0; k < 8; ++k) b[k] = 0.03 * static_cast<double>(k) - 0.1;
  std::copy(wi.begin(), wi.end(), lstm.w_input.mutable_data().begin());
  std::copy(wh.begin(), wh.end(), lstm.w_hidden.mutable_data().begin());
  std::copy(b.begin(), b.end(), lstm.bias.mutable_data().begin());
  Tensor table = Tensor::from({3, 2}, {0.0, 0.0, 0.7, -0.3, -1.1, 0.4});
  const std::vector<std::size_t> tokens{1, 2, 1};
  WordFeatures out = lstm.encode(table, tokens);
  ASSERT_EQ(out.features.shape(), (Shape{2, 3}));

  double h[2] = {0, 0}, c[2] = {0, 0};
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const double x[2] = {table.at(tokens[t] * 2), table.at(tokens[t] * 2 + 1)};
    double z[8];
    for (std::size_t r = 0; r < 8; ++r)
      z[r] = wi[r * 2] * x[0] + wi[r * 2 + 1] * x[1] + wh[r * 2] * h[0] + wh[r * 2 + 1] * h[1] + b[r];
    for (std::size_t u = 0; u < 2; ++u) {
      const double ig = sig(z[u]), fg = sig(z[2 + u]), gg = std::tanh(z[4 + u]), og = sig(z[6 + u]);
      c[u] = fg * c[u] + ig * gg;
      h[u] = og * std::tanh(c[u]);
    }
    for (std::size_t u = 0; u < 2; ++u) EXPECT_NEAR(out.features.at(u * 3 + t), h[u], 1e-12);
  }
  EXPECT_NEAR(out.final_state.at(0), h[0], 1e-12);
  EXPECT_NEAR(out.final_state.at(1), h[1], 1e-12);
}

TEST(Lstm, ZeroWeightsGiveZeroStates) {
  Initializer init(1);
  LstmEncoder lstm(3, 4, init);
  for (Tensor* t : {&lstm.w_input, &lstm.w_hidden, &lstm.bias})
    std::fill(t->mutable_data().begin(), t->mutable_data().end(), 0.0);
  WordFeatures out = lstm.encode(Tensor::zeros({5, 3}), {2, 3, 4});
  for (double v : out.features.data()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, OutputShapesAndTruncation) {
  Initializer init(2);
  LstmEncoder lstm(3, 4, init);
  Tensor table = init.normal({6, 3}, 0.1);
  EXPECT_EQ(lstm.encode(table, {2}).features.shape(), (Shape{4, 1}));
  EXPECT_EQ(lstm.encode(table, std::vector<std::size_t>(25, 3)).features.shape(), (Shape{4, 25}));
  WordFeatures cut = lstm.encode(table, std::vector<std::size_t>(30, 3));
  EXPECT_EQ(cut.length, kMaxTokens);
  EXPECT_EQ(cut.features.dim(1), kMaxTokens);
  EXPECT_THROW(lstm.encode(table, {}), UsageError);
  EXPECT_THROW(lstm.encode(Tensor::zeros({6, 2}), {2}), ShapeError);
}
