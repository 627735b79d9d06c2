#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "shnet/tensor.hpp"

namespace shnet::check {

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Random configurations per case.
  std::size_t configs = 20;
  std::uint64_t seed = 0;
  /// Coordinates probed per input tensor; smaller tensors are probed fully.
  std::size_t coords_per_tensor = 24;
  /// Denominator floor of the relative error.
  double floor = 1e-6;
};

struct CheckStats {
  double max_rel_error = 0.0;
  std::size_t probed = 0;
  /// Coordinates whose one-sided differences disagree, i.e. the step crossed
  /// a relu or max-pool switch. They are excluded from max_rel_error.
  std::size_t kinks = 0;
};

/// Central differences (f(x+h) - f(x-h)) / 2h of a scalar-valued `f`
/// against the gradients backward() leaves on `inputs`, with
/// rel = |a - n| / max(|a|, |n|, floor).
CheckStats check_gradients(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& inputs,
                           const GradcheckOptions& options, std::mt19937_64& rng);

struct CaseResult {
  std::string module;
  std::string name;
  std::size_t configs = 0;
  std::size_t probed = 0;
  std::size_t kinks = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// tensor-core, text-encoder, visual-backbone, sfm, hcam, decoder-loss, model.
const std::vector<std::string>& gradcheck_modules();

/// Throws UsageError for unknown module names. An empty list means all.
std::vector<CaseResult> run_gradcheck(const std::vector<std::string>& modules,
                                      const GradcheckOptions& options = {});

/// One row per case: module, name, configs, probed, kinks, max rel error,
/// PASS/FAIL.
std::string format_table(const std::vector<CaseResult>& results);

}  // namespace shnet::check
