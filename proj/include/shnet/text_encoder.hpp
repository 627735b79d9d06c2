#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "shnet/params.hpp"
#include "shnet/tensor.hpp"

namespace shnet {

inline constexpr std::size_t kMaxTokens = 25;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercases and splits on whitespace and ASCII punctuation.
std::vector<std::string> tokenize(std::string_view text);

/// Token <-> index map. Index 0 is PAD, 1 is UNK; real tokens start at 2.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);

  /// One token per line; line n (0-based) holds index n + 2.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t add(const std::string& token);
  std::size_t index(std::string_view token) const;
  const std::string& token(std::size_t index) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Trainable [|V| x d] word table.
struct EmbeddingTable {
  Tensor table;
  /// Rows taken from a file (the rest were randomly initialized).
  std::size_t loaded_rows = 0;
};

/// Every row is drawn from N(0, 0.1^2) in index order, then rows for tokens
/// present in the file are overwritten. `dim` is used only when the file
/// holds no vectors.
EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim,
                                 std::uint64_t seed);
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const Vocabulary& vocab, std::size_t dim,
                               std::uint64_t seed);

/// Word-level features: column i is the LSTM hidden state after token i.
struct WordFeatures {
  Tensor features;  // [C x T]
  /// Hidden state after the last token, [C x 1].
  Tensor final_state;
  std::size_t length = 0;
};

/// Single-layer unidirectional LSTM over embedded tokens. Gate order in
/// the stacked weights is input, forget, cell, output.
class LstmEncoder {
 public:
  LstmEncoder(std::size_t input_dim, std::size_t hidden, Initializer& init);

  /// Sequences longer than kMaxTokens are cut to their first kMaxTokens
  /// tokens, with a warning on stderr.
  WordFeatures encode(const Tensor& embeddings,
                      const std::vector<std::size_t>& tokens) const;

  void collect(ParamList& out, const std::string& prefix) const;

  std::size_t hidden() const { return hidden_; }
  std::size_t input_dim() const { return input_dim_; }

  Tensor w_input;   // [4C x d]
  Tensor w_hidden;  // [4C x C]
  Tensor bias;      // [4C x 1]

 private:
  std::size_t input_dim_;
  std::size_t hidden_;
};

/// Owns the embedding table and the LSTM.
class TextEncoder {
 public:
  TextEncoder(EmbeddingTable embeddings, std::size_t hidden,
              Initializer& init);

  WordFeatures encode(const std::vector<std::size_t>& tokens) const {
    return lstm.encode(embeddings.table, tokens);
  }
  void collect(ParamList& out, const std::string& prefix) const;

  EmbeddingTable embeddings;
  LstmEncoder lstm;
};

}  // namespace shnet
