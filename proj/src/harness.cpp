#include "shnet/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "shnet/decoder.hpp"
#include "shnet/image_io.hpp"
#include "shnet/ops.hpp"
#include "shnet/optim.hpp"

namespace shnet {

namespace fs = std::filesystem;

namespace {

fs::path manifest_path(const fs::path& data, const std::string& split) {
  if (fs::is_directory(data)) return data / (split + ".jsonl");
  return data;
}

std::vector<std::size_t> encode_text(const Vocabulary& vocab,
                                     const std::string& text) {
  return vocab.encode(tokenize(text));
}

}  // namespace

Vocabulary dataset_vocabulary(const fs::path& data) {
  const fs::path dir = fs::is_directory(data) ? data : data.parent_path();
  const fs::path file = dir / "vocab.txt";
  if (!data.empty() && fs::exists(file)) return Vocabulary::load(file);
  return synth::grammar_vocabulary();
}

Dataset load_dataset(const fs::path& data, const std::string& split,
                     const Vocabulary& vocab, std::size_t resolution) {
  const fs::path manifest = manifest_path(data, split);
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest " + manifest.string());
  const fs::path root = manifest.parent_path();
  Dataset out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest.string() + ":" + std::to_string(number);
    Example ex;
    try {
      const auto row = nlohmann::json::parse(line);
      ex.id = row.at("id").get<std::string>();
      ex.expression = row.at("expression").get<std::string>();
      ex.template_id = row.value("template_id", -1);
      const Image8 image = read_image(root / row.at("image_path").get<std::string>());
      const Image8 mask = read_image(root / row.at("mask_path").get<std::string>());
      if (image.width != resolution || image.height != resolution ||
          mask.width != resolution || mask.height != resolution) {
        throw DataError("expected " + std::to_string(resolution) + "x" +
                        std::to_string(resolution) + " image and mask, got " +
                        std::to_string(image.width) + "x" +
                        std::to_string(image.height) + " and " +
                        std::to_string(mask.width) + "x" +
                        std::to_string(mask.height));
      }
      if (image.channels != 3 || mask.channels != 1) {
        throw DataError("expected an RGB image and a single-channel mask");
      }
      ex.image = image_to_tensor(image);
      ex.mask = mask_to_tensor(mask);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const ImageError& e) {
      throw DataError(where + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    ex.tokens = encode_text(vocab, ex.expression);
    if (ex.tokens.empty()) throw DataError(where + ": empty expression");
    out.examples.push_back(std::move(ex));
  }
  if (out.examples.empty()) throw DataError(manifest.string() + " holds no samples");
  return out;
}

Dataset dataset_from_samples(const std::vector<synth::RefSample>& samples,
                             const Vocabulary& vocab) {
  Dataset out;
  for (const auto& s : samples) {
    Example ex;
    ex.id = s.id;
    ex.image = image_to_tensor(s.image);
    ex.mask = mask_to_tensor(s.mask);
    ex.expression = s.expression.text();
    ex.tokens = encode_text(vocab, ex.expression);
    ex.template_id = static_cast<int>(s.expression.kind);
    out.examples.push_back(std::move(ex));
  }
  return out;
}

std::string format_step(const StepRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "step=%zu lr=%.17g loss=%.17g", r.step, r.lr,
                r.loss);
  return buf;
}

std::vector<StepRecord> train(Model& model, const Dataset& data,
                              const RunConfig& cfg, const TrainOptions& options) {
  if (data.size() == 0) throw DataError("training set is empty");
  ParamList params = model.parameters();
  AdamW optimizer(params, {.weight_decay = cfg.weight_decay});
  std::vector<std::size_t> order(data.size());
  std::size_t epoch = static_cast<std::size_t>(-1);
  std::vector<StepRecord> log;
  log.reserve(cfg.steps);
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    zero_grads(params);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const std::size_t position = step * cfg.batch + b;
      if (position / data.size() != epoch) {
        epoch = position / data.size();
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(synth::derive_seed(cfg.seed, 11, epoch));
        std::shuffle(order.begin(), order.end(), rng);
      }
      const Example& ex = data.examples[order[position % data.size()]];
      Tensor loss = mask_loss(model.forward(ex.image, ex.tokens), ex.mask);
      loss_sum += loss.item();
      BackwardOptions backward_options;
      backward_options.seed = inv_batch;
      backward(loss, backward_options);
    }
    const StepRecord record{step, poly_lr(cfg.lr0, step, cfg.steps, cfg.power),
                            loss_sum * inv_batch};
    if (!std::isfinite(record.loss)) {
      std::ostringstream dump;
      dump << "non-finite loss at step " << step << "; gradient norms:\n";
      for (const auto& p : params) {
        double sq = 0.0;
        if (p.tensor.has_grad())
          for (double g : p.tensor.grad()) sq += g * g;
        dump << "  " << p.name << " " << std::sqrt(sq) << "\n";
      }
      throw NumericalError(dump.str());
    }
    optimizer.step(record.lr);
    log.push_back(record);
    if (options.log) *options.log << format_step(record) << '\n';
    if (options.on_step) options.on_step(record);
  }
  return log;
}

double example_loss(const Model& model, const Example& example) {
  NoGradGuard guard;
  return mask_loss(model.forward(example.image, example.tokens), example.mask).item();
}

EvalAccumulator evaluate(const Model& model, const Dataset& data) {
  NoGradGuard guard;
  EvalAccumulator acc;
  for (const auto& ex : data.examples) {
    acc.accumulate(binarize(model.forward(ex.image, ex.tokens)), ex.mask);
  }
  return acc;
}

Tensor predict(const Model& model, const Vocabulary& vocab, const Tensor& image,
               const std::string& expression) {
  NoGradGuard guard;
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("predict: expected [3 x H x W] image, got " +
                     shape_str(image.shape()));
  }
  const auto tokens = encode_text(vocab, expression);
  if (tokens.empty()) throw DataError("predict: empty expression");
  const std::size_t r = model.config().resolution;
  const std::size_t h = image.dim(1), w = image.dim(2);
  const bool resample = h != r || w != r;
  Tensor input = resample ? ops::bilinear_upsample(image, r, r) : image;
  Tensor probs = model.forward(input, tokens);
  return resample ? ops::bilinear_upsample(probs, h, w) : probs;
}

double AblationResult::mean_iou(Variant v) const {
  const auto rows = of(v);
  if (rows.empty()) throw UsageError("no ablation entries for " +
                                     std::string(variant_name(v)));
  double s = 0.0;
  for (const auto* e : rows) s += e->report.overall_iou;
  return 100.0 * s / static_cast<double>(rows.size());
}

std::vector<const AblationEntry*> AblationResult::of(Variant v) const {
  std::vector<const AblationEntry*> out;
  for (const auto& e : entries)
    if (e.variant == v) out.push_back(&e);
  return out;
}

std::string AblationResult::table() const {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-2s | %-16s | %8s | %8s | %8s | %8s | %8s | %11s",
                "#", "Method", "prec@0.5", "prec@0.6", "prec@0.7", "prec@0.8",
                "prec@0.9", "Overall IoU");
  os << buf;
  for (auto s : seeds) os << " | seed " << s;
  os << '\n';
  std::size_t index = 0;
  for (Variant v : kAllVariants) {
    const auto rows = of(v);
    if (rows.empty()) continue;
    std::array<double, 5> prec{};
    for (const auto* e : rows)
      for (std::size_t k = 0; k < prec.size(); ++k) prec[k] += e->report.precision[k];
    for (auto& p : prec) p /= static_cast<double>(rows.size());
    std::snprintf(buf, sizeof buf,
                  "%-2zu | %-16s | %8.2f | %8.2f | %8.2f | %8.2f | %8.2f | %11.2f",
                  ++index, std::string(variant_label(v)).c_str(), prec[0], prec[1],
                  prec[2], prec[3], prec[4], mean_iou(v));
    os << buf;
    for (const auto* e : rows) {
      std::snprintf(buf, sizeof buf, " | %6.2f", 100.0 * e->report.overall_iou);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

AblationResult run_ablation(const RunConfig& base,
                            const std::vector<Variant>& variants,
                            std::ostream* progress) {
  AblationResult result;
  result.seeds = base.seed_list();
  const Vocabulary vocab = synth::grammar_vocabulary();
  for (std::uint64_t seed : result.seeds) {
    const synth::Split split = synth::generate_split(
        seed, base.train_samples, base.test_samples, base.resolution);
    const Dataset train_set = dataset_from_samples(split.train, vocab);
    const Dataset test_set = dataset_from_samples(split.test, vocab);
    for (Variant v : variants) {
      RunConfig cfg = base;
      cfg.variant = std::string(variant_name(v));
      cfg.seed = seed;
      const auto start = std::chrono::steady_clock::now();
      Model model(cfg.model_config(), vocab);
      train(model, train_set, cfg);
      AblationEntry entry{v, seed, EvalReport::from(evaluate(model, test_set)), 0.0};
      entry.seconds = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
      if (progress) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "seed=%llu variant=%s overall_iou=%.4f seconds=%.1f",
                      static_cast<unsigned long long>(seed),
                      std::string(variant_name(v)).c_str(),
                      100.0 * entry.report.overall_iou, entry.seconds);
        *progress << buf << std::endl;
      }
      result.entries.push_back(entry);
    }
  }
  return result;
}

}  // namespace shnet
