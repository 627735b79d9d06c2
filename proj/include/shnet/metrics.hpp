#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "shnet/tensor.hpp"

namespace shnet {

inline constexpr std::array<double, 5> kPrecisionThresholds{0.5, 0.6, 0.7, 0.8,
                                                            0.9};

/// Overall IoU (sum of intersections over sum of unions) and Precision@X
/// (share of samples whose IoU is strictly greater than X).
class EvalAccumulator {
 public:
  /// Masks must have equal shapes and contain only 0 and 1.
  void accumulate(const Tensor& pred, const Tensor& gt);
  void accumulate_counts(std::uint64_t intersection, std::uint64_t uni,
                         double sample_iou);
  /// Sums counts and concatenates per-sample IoUs.
  void merge(const EvalAccumulator& other);

  double overall_iou() const;
  /// Percentage in [0, 100].
  double precision_at(double threshold) const;

  std::size_t samples() const { return ious_.size(); }
  std::uint64_t total_intersection() const { return intersection_; }
  std::uint64_t total_union() const { return union_; }
  const std::vector<double>& sample_ious() const { return ious_; }

 private:
  std::uint64_t intersection_ = 0;
  std::uint64_t union_ = 0;
  std::vector<double> ious_;
};

/// IoU of one pair: 1 when both are empty, 0 when exactly one is.
double sample_iou(std::uint64_t intersection, std::uint64_t uni);

/// Probability map -> binary mask at threshold 0.5 (strictly greater).
Tensor binarize(const Tensor& probs, double threshold = 0.5);

struct EvalReport {
  double overall_iou = 0.0;
  std::array<double, 5> precision{};
  std::size_t samples = 0;

  static EvalReport from(const EvalAccumulator& acc);
  /// `overall_iou=<f>` then `prec@0.5=<f>` ... `prec@0.9=<f>`, one per line.
  std::string to_text() const;
  std::string to_json() const;
};

}  // namespace shnet
