#include "shnet/params.hpp"

#include <cmath>

namespace shnet {

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

void zero_grads(ParamList& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

Tensor Initializer::normal(Shape shape, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(engine_);
  return Tensor::from(std::move(shape), std::move(values), true);
}

Tensor Initializer::he(Shape shape, std::size_t fan_in) {
  return normal(std::move(shape), std::sqrt(2.0 / static_cast<double>(fan_in)));
}

Tensor Initializer::xavier(Shape shape, std::size_t fan_in,
                           std::size_t fan_out) {
  const double bound =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(engine_);
  return Tensor::from(std::move(shape), std::move(values), true);
}

}  // namespace shnet
