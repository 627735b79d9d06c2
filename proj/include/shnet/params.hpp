#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "shnet/tensor.hpp"

namespace shnet {

/// How the optimizer treats a parameter.
enum class ParamRole {
  kWeight,     // decoupled weight decay applies
  kNoDecay,    // biases, norm gains, positional embeddings
  kEmbedding,  // decayed, except the PAD row (row 0)
};

struct NamedParam {
  std::string name;
  Tensor tensor;
  ParamRole role = ParamRole::kWeight;
};

using ParamList = std::vector<NamedParam>;

std::size_t count_parameters(const ParamList& params);
void zero_grads(ParamList& params);

/// Seeded source for parameter initialization. Draw order is the
/// construction order of the model, so equal seeds give equal weights.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : engine_(seed) {}

  Tensor normal(Shape shape, double stddev);
  /// He-normal for a conv/linear weight with the given fan-in.
  Tensor he(Shape shape, std::size_t fan_in);
  /// Xavier-uniform for a square-ish projection.
  Tensor xavier(Shape shape, std::size_t fan_in, std::size_t fan_out);
  Tensor zeros(Shape shape) { return Tensor::zeros(std::move(shape), true); }
  Tensor ones(Shape shape) { return Tensor::full(std::move(shape), 1.0, true); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace shnet
