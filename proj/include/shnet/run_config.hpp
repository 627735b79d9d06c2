#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shnet/model.hpp"

namespace shnet {

/// Everything a run needs. Keys of the config file are the field names
/// below (e.g. `lr0 = 1.2e-4`); each one is also a CLI flag.
struct RunConfig {
  std::string variant = "shnet";
  std::size_t resolution = 64;
  std::size_t channels = 64;
  std::size_t heads = 4;
  std::size_t embed_dim = 64;
  std::size_t batch = 8;
  std::size_t steps = 3000;
  double lr0 = 1.2e-4;
  double weight_decay = 9e-5;
  double power = 0.7;
  std::uint64_t seed = 0;
  std::size_t train_samples = 2000;
  std::size_t test_samples = 200;
  std::string data;        // dataset directory or manifest
  std::string embeddings;  // word vectors, optional
  std::string checkpoint;  // checkpoint to read (eval, predict)
  std::string out;         // output directory or file
  std::string seeds = "0,1,2";  // ablate only

  ModelConfig model_config() const;
  std::vector<std::uint64_t> seed_list() const;
};

/// Names of every key, in declaration order.
const std::vector<std::string>& config_keys();

/// Assigns one key. Throws ConfigError on unknown keys or bad values.
void set_config_value(RunConfig& config, const std::string& key,
                      const std::string& value);
std::string get_config_value(const RunConfig& config, const std::string& key);

/// Flat `key = value` lines; `#` starts a comment. Throws ConfigError with the
/// line number on malformed lines.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Positive numeric fields and a known variant.
void validate(const RunConfig& config);

std::string to_text(const RunConfig& config);

}  // namespace shnet
