#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "shnet/params.hpp"

namespace shnet {

/// Binary parameter container:
///   "SHNETCKPT1"
///   per parameter: u32 name length, UTF-8 name, u32 rank, u32 extents...,
///                  raw little-endian float64 values
/// All integers little-endian. Parameters follow until end of file.
inline constexpr char kCheckpointMagic[] = "SHNETCKPT1";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

void save_checkpoint(const std::filesystem::path& path,
                     const ParamList& params);
std::vector<StoredTensor> read_checkpoint(const std::filesystem::path& path);

/// Copies stored values into `params` by name. Any missing, extra, or
/// differently shaped parameter is reported in a single CheckpointError.
void load_checkpoint(const std::filesystem::path& path, ParamList& params);

}  // namespace shnet
