// Command-line front end: gen-data, train, eval, predict, gradcheck, ablate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "shnet/checkpoint.hpp"
#include "shnet/decoder.hpp"
#include "shnet/gradcheck.hpp"
#include "shnet/harness.hpp"
#include "shnet/image_io.hpp"
#include "shnet/run_config.hpp"
#include "shnet/synth_data.hpp"

namespace fs = std::filesystem;
using namespace shnet;

namespace {

enum ExitCode {
  kOk = 0,
  kConfigFailure = 2,
  kDataFailure = 3,
  kNumericalFailure = 4,
  kGradcheckFailure = 5,
};

// Every config key becomes a flag of the same name on every verb.
struct CommonFlags {
  std::string config_file;
  std::map<std::string, std::optional<std::string>> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value config file");
    for (const auto& key : config_keys()) {
      overrides[key];
      app->add_option("--" + key, overrides[key], "overrides config key " + key);
    }
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    for (const auto& [key, value] : overrides)
      if (value) set_config_value(cfg, key, *value);
    validate(cfg);
    return cfg;
  }
};

fs::path require_out(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError("--out is required");
  return cfg.out;
}

void require_data(const RunConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("--data is required");
}

Model load_model(const RunConfig& cfg, const Vocabulary& vocab) {
  if (cfg.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  Model model(cfg.model_config(), vocab);
  ParamList params = model.parameters();
  load_checkpoint(cfg.checkpoint, params);
  return model;
}

int gen_data(const RunConfig& cfg) {
  const fs::path out = require_out(cfg);
  const auto split =
      synth::generate_split(cfg.seed, cfg.train_samples, cfg.test_samples, cfg.resolution);
  synth::write_split(split, out);
  std::cout << "wrote " << split.train.size() << " train and " << split.test.size()
            << " test samples to " << out.string() << "\n";
  return kOk;
}

int train_cmd(const RunConfig& cfg) {
  require_data(cfg);
  const fs::path out = require_out(cfg);
  fs::create_directories(out);
  const Vocabulary vocab = dataset_vocabulary(cfg.data);
  const Dataset data = load_dataset(cfg.data, "train", vocab, cfg.resolution);
  Model model(cfg.model_config(), vocab);
  {
    std::ofstream config_copy(out / "config.txt");
    config_copy << to_text(cfg);
  }
  std::ofstream log(out / "train.log");
  TrainOptions options;
  options.on_step = [&](const StepRecord& r) {
    const std::string line = format_step(r);
    log << line << '\n';
    std::cout << line << '\n';
  };
  train(model, data, cfg, options);
  save_checkpoint(out / "model.ckpt", model.parameters());
  std::cout << "checkpoint " << (out / "model.ckpt").string() << "\n";
  return kOk;
}

int eval_cmd(const RunConfig& cfg, const std::string& split) {
  require_data(cfg);
  const Vocabulary vocab = dataset_vocabulary(cfg.data);
  const Model model = load_model(cfg, vocab);
  const Dataset data = load_dataset(cfg.data, split, vocab, cfg.resolution);
  const EvalReport report = EvalReport::from(evaluate(model, data));
  std::cout << report.to_text();
  if (!cfg.out.empty()) {
    const fs::path out = cfg.out;
    fs::create_directories(out);
    std::ofstream(out / "report.txt") << report.to_text();
    std::ofstream(out / "report.json") << report.to_json() << '\n';
  }
  return kOk;
}

int predict_cmd(const RunConfig& cfg, const std::string& image_path,
                const std::string& expression) {
  const fs::path out = require_out(cfg);
  const Vocabulary vocab = dataset_vocabulary(cfg.data);
  const Model model = load_model(cfg, vocab);
  const Image8 image = read_image(image_path);
  if (image.channels != 3) throw DataError(image_path + ": expected an RGB image");
  const Tensor probs = predict(model, vocab, image_to_tensor(image), expression);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const std::string pgm = out.string() + ".pgm";
  const std::string dump = out.string() + ".mask";
  write_mask_pgm(pgm, probs);
  write_probability_dump(dump, probs);
  std::cout << "wrote " << pgm << " and " << dump << " (" << probs.dim(2) << "x"
            << probs.dim(1) << ")\n";
  return kOk;
}

int gradcheck_cmd(const RunConfig& cfg, const std::string& modules, std::size_t configs) {
  std::vector<std::string> list;
  std::stringstream ss(modules);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) list.push_back(item);
  check::GradcheckOptions options;
  options.configs = configs;
  options.seed = cfg.seed;
  std::vector<check::CaseResult> results;
  try {
    results = check::run_gradcheck(list, options);
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
  std::cout << check::format_table(results);
  for (const auto& r : results)
    if (!r.passed) return kGradcheckFailure;
  return kOk;
}

int ablate_cmd(const RunConfig& cfg) {
  const AblationResult result =
      run_ablation(cfg, {kAllVariants.begin(), kAllVariants.end()}, &std::cerr);
  const std::string table = result.table();
  std::cout << table;
  if (!cfg.out.empty()) {
    const fs::path out = cfg.out;
    fs::create_directories(out);
    std::ofstream(out / "ablation.txt") << table;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Referring image segmentation: data, training, evaluation"};
  app.require_subcommand(1);

  std::map<std::string, CommonFlags> flags;
  auto verb = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    flags[name].attach(sub);
    return sub;
  };
  verb("gen-data", "generate a synthetic split (images, masks, manifests)");
  verb("train", "train a variant on <data>/train.jsonl");
  CLI::App* eval = verb("eval", "evaluate a checkpoint");
  std::string split = "test";
  eval->add_option("--split", split, "manifest name inside --data");
  CLI::App* pred = verb("predict", "segment one image for one expression");
  std::string image_path, expression;
  pred->add_option("--image", image_path, "input PPM/PGM/PNG")->required();
  pred->add_option("--expression", expression, "referring expression")->required();
  CLI::App* grad = verb("gradcheck", "finite-difference gradient suite");
  std::string modules;
  std::size_t configs = 20;
  grad->add_option("--modules", modules, "comma-separated modules (default: all)");
  grad->add_option("--configs", configs, "random configurations per case");
  verb("ablate", "train and evaluate all variants over --seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    for (auto* sub : app.get_subcommands()) {
      const std::string name = sub->get_name();
      const RunConfig cfg = flags[name].resolve();
      if (name == "gen-data") return gen_data(cfg);
      if (name == "train") return train_cmd(cfg);
      if (name == "eval") return eval_cmd(cfg, split);
      if (name == "predict") return predict_cmd(cfg, image_path, expression);
      if (name == "gradcheck") return gradcheck_cmd(cfg, modules, configs);
      if (name == "ablate") return ablate_cmd(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what();
    return kNumericalFailure;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kDataFailure;
  } catch (const std::runtime_error& e) {
    // DataError, ImageError, FormatError, GenerationError and I/O failures.
    std::cerr << "data error: " << e.what() << "\n";
    return kDataFailure;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigFailure;
  }
  return kConfigFailure;
}
