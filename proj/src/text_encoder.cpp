#include "shnet/text_encoder.hpp"

#include <cctype>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "shnet/ops.hpp"

namespace shnet {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isspace(uc) || std::ispunct(uc)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(uc)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<unk>"};
  index_ = {{"<pad>", kPad}, {"<unk>", kUnk}};
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
  for (const auto& t : tokens) add(t);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vocabulary " + path.string());
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    vocab.add(line);
  }
  return vocab;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write vocabulary " + path.string());
  for (std::size_t i = 2; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

std::size_t Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const std::size_t idx = tokens_.size();
  tokens_.push_back(token);
  index_.emplace(token, idx);
  return idx;
}

std::size_t Vocabulary::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t index) const {
  if (index >= tokens_.size()) {
    throw UsageError("token index " + std::to_string(index) +
                     " outside vocabulary of size " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[index];
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

std::vector<std::size_t> Vocabulary::encode(
    const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index(t));
  return out;
}

EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim,
                                 std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> dist(0.0, 0.1);
  std::vector<double> values(vocab.size() * dim);
  for (auto& v : values) v = dist(engine);
  return {Tensor::from({vocab.size(), dim}, std::move(values), true), 0};
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const Vocabulary& vocab, std::size_t dim,
                               std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open embeddings " + path.string());
  std::vector<std::pair<std::size_t, std::vector<double>>> rows;
  std::size_t file_dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> vec;
    std::string field;
    while (fields >> field) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": not a number: '" + field + "'");
      }
    }
    if (vec.empty()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": token '" + token + "' has no vector");
    }
    if (file_dim == 0) {
      file_dim = vec.size();
    } else if (vec.size() != file_dim) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(file_dim) +
                        " values, got " + std::to_string(vec.size()));
    }
    if (vocab.contains(token)) rows.emplace_back(vocab.index(token), std::move(vec));
  }
  const std::size_t d = file_dim ? file_dim : dim;
  EmbeddingTable table = random_embeddings(vocab, d, seed);
  auto data = table.table.mutable_data();
  for (const auto& [idx, vec] : rows) {
    std::copy(vec.begin(), vec.end(), data.begin() + idx * d);
  }
  table.loaded_rows = rows.size();
  return table;
}

LstmEncoder::LstmEncoder(std::size_t input_dim, std::size_t hidden,
                         Initializer& init)
    : input_dim_(input_dim), hidden_(hidden) {
  w_input = init.xavier({4 * hidden, input_dim}, input_dim, hidden);
  w_hidden = init.xavier({4 * hidden, hidden}, hidden, hidden);
  std::vector<double> b(4 * hidden, 0.0);
  // Forget-gate bias starts at +1.
  for (std::size_t i = hidden; i < 2 * hidden; ++i) b[i] = 1.0;
  bias = Tensor::from({4 * hidden, 1}, std::move(b), true);
}

WordFeatures LstmEncoder::encode(const Tensor& embeddings,
                                 const std::vector<std::size_t>& tokens) const {
  if (tokens.empty()) throw UsageError("encode: empty token sequence");
  if (embeddings.rank() != 2 || embeddings.dim(1) != input_dim_) {
    throw ShapeError("encode: embedding table " +
                     shape_str(embeddings.shape()) + " for LSTM input " +
                     std::to_string(input_dim_));
  }
  std::vector<std::size_t> used = tokens;
  if (used.size() > kMaxTokens) {
    std::cerr << "warning: expression of " << used.size()
              << " tokens truncated to " << kMaxTokens << "\n";
    used.resize(kMaxTokens);
  }
  const std::size_t steps = used.size();
  const std::size_t c = hidden_;

  Tensor embedded = ops::transpose(ops::gather_rows(embeddings, used));
  Tensor input_gates = ops::matmul(w_input, embedded);  // [4C x T]
  Tensor h = Tensor::zeros({c, 1});
  Tensor cell = Tensor::zeros({c, 1});
  std::vector<Tensor> states;
  states.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor z = ops::add(ops::add(ops::slice(input_gates, 1, t, 1),
                                 ops::matmul(w_hidden, h)),
                        bias);
    Tensor i = ops::sigmoid(ops::slice(z, 0, 0, c));
    Tensor f = ops::sigmoid(ops::slice(z, 0, c, c));
    Tensor g = ops::tanh(ops::slice(z, 0, 2 * c, c));
    Tensor o = ops::sigmoid(ops::slice(z, 0, 3 * c, c));
    cell = ops::add(ops::mul(f, cell), ops::mul(i, g));
    h = ops::mul(o, ops::tanh(cell));
    states.push_back(h);
  }
  WordFeatures out;
  out.features = steps == 1 ? states.front() : ops::concat(states, 1);
  out.final_state = h;
  out.length = steps;
  return out;
}

void LstmEncoder::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "w_input", w_input, ParamRole::kWeight});
  out.push_back({prefix + "w_hidden", w_hidden, ParamRole::kWeight});
  out.push_back({prefix + "bias", bias, ParamRole::kNoDecay});
}

TextEncoder::TextEncoder(EmbeddingTable table, std::size_t hidden,
                         Initializer& init)
    : embeddings(std::move(table)),
      lstm(embeddings.table.dim(1), hidden, init) {}

void TextEncoder::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "embedding", embeddings.table, ParamRole::kEmbedding});
  lstm.collect(out, prefix + "lstm.");
}

}  // namespace shnet
