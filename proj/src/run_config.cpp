#include "shnet/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace shnet {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("bad value for " + key + ": '" + value + "'");
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field field(T RunConfig::*member) {
  Field f;
  f.set = [member](RunConfig& c, const std::string& key, const std::string& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      c.*member = v;
    } else {
      c.*member = parse_number<T>(key, v);
    }
  };
  f.get = [member](const RunConfig& c) {
    if constexpr (std::is_same_v<T, std::string>) {
      return c.*member;
    } else if constexpr (std::is_same_v<T, double>) {
      return format_double(c.*member);
    } else {
      return std::to_string(c.*member);
    }
  };
  return f;
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table{
      {"variant", field(&RunConfig::variant)},
      {"resolution", field(&RunConfig::resolution)},
      {"channels", field(&RunConfig::channels)},
      {"heads", field(&RunConfig::heads)},
      {"embed_dim", field(&RunConfig::embed_dim)},
      {"batch", field(&RunConfig::batch)},
      {"steps", field(&RunConfig::steps)},
      {"lr0", field(&RunConfig::lr0)},
      {"weight_decay", field(&RunConfig::weight_decay)},
      {"power", field(&RunConfig::power)},
      {"seed", field(&RunConfig::seed)},
      {"train_samples", field(&RunConfig::train_samples)},
      {"test_samples", field(&RunConfig::test_samples)},
      {"data", field(&RunConfig::data)},
      {"embeddings", field(&RunConfig::embeddings)},
      {"checkpoint", field(&RunConfig::checkpoint)},
      {"out", field(&RunConfig::out)},
      {"seeds", field(&RunConfig::seeds)},
  };
  return table;
}

const Field& lookup(const std::string& key) {
  for (const auto& [name, f] : fields())
    if (name == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& config, const std::string& key,
                      const std::string& value) {
  lookup(key).set(config, key, value);
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
  return lookup(key).get(config);
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(number) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": " +
                        e.what());
    }
  }
}

void validate(const RunConfig& c) {
  parse_variant(c.variant);
  auto positive = [](const char* name, double v) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive("resolution", static_cast<double>(c.resolution));
  positive("channels", static_cast<double>(c.channels));
  positive("heads", static_cast<double>(c.heads));
  positive("embed_dim", static_cast<double>(c.embed_dim));
  positive("batch", static_cast<double>(c.batch));
  positive("steps", static_cast<double>(c.steps));
  positive("lr0", c.lr0);
  positive("power", c.power);
  positive("train_samples", static_cast<double>(c.train_samples));
  positive("test_samples", static_cast<double>(c.test_samples));
  if (c.weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (c.resolution % 16 != 0) {
    throw ConfigError("resolution must be a multiple of 16, got " +
                      std::to_string(c.resolution));
  }
  if (c.channels % c.heads != 0) {
    throw ConfigError("channels must be divisible by heads");
  }
  c.seed_list();
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.variant = parse_variant(variant);
  m.resolution = resolution;
  m.channels = channels;
  m.heads = heads;
  m.embed_dim = embed_dim;
  m.seed = seed;
  m.embeddings = embeddings;
  return m;
}

std::vector<std::uint64_t> RunConfig::seed_list() const {
  std::vector<std::uint64_t> out;
  std::stringstream ss(seeds);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<std::uint64_t>("seeds", item));
  }
  if (out.empty()) throw ConfigError("seeds must list at least one seed");
  return out;
}

std::string to_text(const RunConfig& config) {
  std::string out;
  for (const auto& key : config_keys()) {
    out += key + " = " + get_config_value(config, key) + "\n";
  }
  return out;
}

}  // namespace shnet
