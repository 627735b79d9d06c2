#pragma once

#include <cstddef>
#include <vector>

#include "shnet/params.hpp"

namespace shnet {

/// lr0 * (1 - t / total)^power, clamped to 0 past the end.
double poly_lr(double lr0, std::size_t step, std::size_t total, double power);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 9e-5;
};

/// Adam with decoupled weight decay:
///   p <- p * (1 - lr * wd)            (decayed roles only)
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Parameters that do not require grad, or have no gradient yet, are left
/// untouched.
class AdamW {
 public:
  AdamW(ParamList params, AdamWConfig config = {});

  void step(double lr);
  std::size_t steps() const { return steps_; }

  const ParamList& params() const { return params_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<double>& second_moment(std::size_t i) const { return v_[i]; }

 private:
  ParamList params_;
  AdamWConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t steps_ = 0;
};

}  // namespace shnet
