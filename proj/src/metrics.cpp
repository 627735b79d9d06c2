#include "shnet/metrics.hpp"

#include <cstdio>
#include "json.hpp"
#include <sstream>

namespace shnet {

double sample_iou(std::uint64_t intersection, std::uint64_t uni) {
  if (uni == 0) return 1.0;
  return static_cast<double>(intersection) / static_cast<double>(uni);
}

void EvalAccumulator::accumulate(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape()) {
    throw UsageError("accumulate: prediction " + shape_str(pred.shape()) +
                     " vs ground truth " + shape_str(gt.shape()));
  }
  const auto p = pred.data();
  const auto g = gt.data();
  std::uint64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] == 1.0, b = g[i] == 1.0;
    if ((!a && p[i] != 0.0) || (!b && g[i] != 0.0)) {
      throw UsageError("accumulate: masks must be binary (got " +
                       std::to_string(a ? g[i] : p[i]) + ")");
    }
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  accumulate_counts(inter, uni, sample_iou(inter, uni));
}

void EvalAccumulator::accumulate_counts(std::uint64_t intersection,
                                        std::uint64_t uni, double iou) {
  intersection_ += intersection;
  union_ += uni;
  ious_.push_back(iou);
}

void EvalAccumulator::merge(const EvalAccumulator& other) {
  intersection_ += other.intersection_;
  union_ += other.union_;
  ious_.insert(ious_.end(), other.ious_.begin(), other.ious_.end());
}

double EvalAccumulator::overall_iou() const {
  if (ious_.empty()) throw UsageError("overall_iou: no samples accumulated");
  return sample_iou(intersection_, union_);
}

double EvalAccumulator::precision_at(double threshold) const {
  if (ious_.empty()) throw UsageError("precision_at: no samples accumulated");
  std::size_t above = 0;
  for (double iou : ious_) above += iou > threshold ? 1 : 0;
  return 100.0 * static_cast<double>(above) / static_cast<double>(ious_.size());
}

Tensor binarize(const Tensor& probs, double threshold) {
  std::vector<double> values(probs.numel());
  const auto d = probs.data();
  for (std::size_t i = 0; i < d.size(); ++i) values[i] = d[i] > threshold ? 1.0 : 0.0;
  return Tensor::from(probs.shape(), std::move(values));
}

EvalReport EvalReport::from(const EvalAccumulator& acc) {
  EvalReport r;
  r.overall_iou = acc.overall_iou();
  for (std::size_t i = 0; i < kPrecisionThresholds.size(); ++i)
    r.precision[i] = acc.precision_at(kPrecisionThresholds[i]);
  r.samples = acc.samples();
  return r;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "overall_iou=%.6f\n", overall_iou);
  os << buf;
  for (std::size_t i = 0; i < kPrecisionThresholds.size(); ++i) {
    std::snprintf(buf, sizeof buf, "prec@%.1f=%.6f\n", kPrecisionThresholds[i],
                  precision[i]);
    os << buf;
  }
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["overall_iou"] = overall_iou;
  for (std::size_t i = 0; i < kPrecisionThresholds.size(); ++i) {
    char key[16];
    std::snprintf(key, sizeof key, "prec@%.1f", kPrecisionThresholds[i]);
    j[key] = precision[i];
  }
  j["samples"] = samples;
  return j.dump(2);
}

}  // namespace shnet
