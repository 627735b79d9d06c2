#include "shnet/optim.hpp"

#include <cmath>

namespace shnet {

double poly_lr(double lr0, std::size_t step, std::size_t total, double power) {
  if (total == 0 || step >= total) return 0.0;
  const double frac = static_cast<double>(step) / static_cast<double>(total);
  return lr0 * std::pow(1.0 - frac, power);
}

AdamW::AdamW(ParamList params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double t = static_cast<double>(steps_);
  const double bias1 = 1.0 - std::pow(b1, t);
  const double bias2 = 1.0 - std::pow(b2, t);
  const double decay = 1.0 - lr * config_.weight_decay;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    if (!p.requires_grad() || !p.has_grad()) continue;
    auto data = p.mutable_data();
    const auto grad = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    // Row 0 of an embedding table is PAD and never decays.
    std::size_t decay_from = data.size();
    if (params_[i].role == ParamRole::kWeight) {
      decay_from = 0;
    } else if (params_[i].role == ParamRole::kEmbedding) {
      decay_from = p.rank() == 2 ? p.dim(1) : 0;
    }
    for (std::size_t k = 0; k < data.size(); ++k) {
      if (k >= decay_from) data[k] *= decay;
      const double g = grad[k];
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      data[k] -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

}  // namespace shnet
