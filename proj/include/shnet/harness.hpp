#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "shnet/metrics.hpp"
#include "shnet/model.hpp"
#include "shnet/run_config.hpp"
#include "shnet/synth_data.hpp"
#include "shnet/text_encoder.hpp"

namespace shnet {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Example {
  std::string id;
  Tensor image;  // [3 x R x R]
  Tensor mask;   // [1 x R x R], binary
  std::string expression;
  std::vector<std::size_t> tokens;
  int template_id = -1;
};

struct Dataset {
  std::vector<Example> examples;
  std::size_t size() const { return examples.size(); }
};

/// vocab.txt next to the manifest when present, else the synthetic grammar.
Vocabulary dataset_vocabulary(const std::filesystem::path& data);

/// `data` is a manifest (.jsonl) or a directory holding `<split>.jsonl`.
/// Paths inside the manifest are relative to its directory. Every image and
/// mask must be R x R.
Dataset load_dataset(const std::filesystem::path& data, const std::string& split,
                     const Vocabulary& vocab, std::size_t resolution);
Dataset dataset_from_samples(const std::vector<synth::RefSample>& samples,
                             const Vocabulary& vocab);

struct StepRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

/// `step=<n> lr=<lr> loss=<loss>` with round-trip precision.
std::string format_step(const StepRecord& record);

struct TrainOptions {
  std::ostream* log = nullptr;
  /// Called after every optimizer step.
  std::function<void(const StepRecord&)> on_step;
};

/// Mini-batch AdamW with polynomial decay. Batches are drawn from a
/// per-epoch permutation seeded from cfg.seed. Throws NumericalError with a
/// per-parameter gradient-norm dump when the loss is not finite.
std::vector<StepRecord> train(Model& model, const Dataset& data,
                              const RunConfig& cfg,
                              const TrainOptions& options = {});

/// Mean BCE of one example, without building a graph.
double example_loss(const Model& model, const Example& example);

EvalAccumulator evaluate(const Model& model, const Dataset& data);

/// Probability map at the input image's size. The image is resampled to the
/// model resolution and the prediction back when the sizes differ.
Tensor predict(const Model& model, const Vocabulary& vocab, const Tensor& image,
               const std::string& expression);

struct AblationEntry {
  Variant variant;
  std::uint64_t seed = 0;
  EvalReport report;
  double seconds = 0.0;
};

struct AblationResult {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationEntry> entries;

  /// Mean overall IoU over seeds, in percent.
  double mean_iou(Variant v) const;
  std::vector<const AblationEntry*> of(Variant v) const;
  /// Rows in ablation order: index, method, prec@0.5..0.9, overall IoU (all
  /// means over seeds, percent), then per-seed overall IoU.
  std::string table() const;
};

/// Trains and evaluates `variants` on one synthetic split per seed.
AblationResult run_ablation(const RunConfig& base,
                            const std::vector<Variant>& variants,
                            std::ostream* progress = nullptr);

}  // namespace shnet
