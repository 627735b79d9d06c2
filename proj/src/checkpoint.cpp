#include "shnet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "binary_io.hpp"

namespace shnet {

void save_checkpoint(const std::filesystem::path& path,
                     const ParamList& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  const std::size_t magic_len = std::strlen(kCheckpointMagic);
  out.write(kCheckpointMagic, static_cast<std::streamsize>(magic_len));
  for (const auto& p : params) {
    io::write_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const Shape& shape = p.tensor.shape();
    io::write_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (auto e : shape) io::write_u32(out, static_cast<std::uint32_t>(e));
    for (double v : p.tensor.data()) io::write_f64(out, v);
  }
  if (!out) throw CheckpointError("short write to " + path.string());
}

std::vector<StoredTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::size_t magic_len = std::strlen(kCheckpointMagic);
  std::string magic(magic_len, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic_len));
  if (!in || magic != kCheckpointMagic) {
    throw CheckpointError(path.string() + " is not an SHNETCKPT1 file");
  }
  std::vector<StoredTensor> tensors;
  while (in.peek() != std::char_traits<char>::eof()) {
    StoredTensor t;
    std::uint32_t name_len = 0, rank = 0;
    if (!io::read_u32(in, name_len)) break;
    t.name.resize(name_len);
    in.read(t.name.data(), name_len);
    if (!in || !io::read_u32(in, rank) || rank == 0) {
      throw CheckpointError("truncated checkpoint entry in " + path.string());
    }
    for (std::uint32_t i = 0; i < rank; ++i) {
      std::uint32_t e = 0;
      if (!io::read_u32(in, e)) {
        throw CheckpointError("truncated shape for " + t.name);
      }
      t.shape.push_back(e);
    }
    t.values.resize(shape_numel(t.shape));
    for (auto& v : t.values) {
      if (!io::read_f64(in, v)) {
        throw CheckpointError("truncated values for " + t.name);
      }
    }
    tensors.push_back(std::move(t));
  }
  return tensors;
}

void load_checkpoint(const std::filesystem::path& path, ParamList& params) {
  auto stored = read_checkpoint(path);
  std::map<std::string, const StoredTensor*> by_name;
  for (const auto& t : stored) by_name[t.name] = &t;

  std::ostringstream diff;
  std::size_t problems = 0;
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      diff << "\n  missing " << p.name << " " << shape_str(p.tensor.shape());
      ++problems;
    } else if (it->second->shape != p.tensor.shape()) {
      diff << "\n  " << p.name << ": checkpoint " << shape_str(it->second->shape)
           << " vs model " << shape_str(p.tensor.shape());
      ++problems;
    }
  }
  for (const auto& t : stored) {
    bool known = false;
    for (const auto& p : params) known = known || p.name == t.name;
    if (!known) {
      diff << "\n  unexpected " << t.name << " " << shape_str(t.shape);
      ++problems;
    }
  }
  if (problems) {
    throw CheckpointError("checkpoint " + path.string() +
                          " does not match the model geometry:" + diff.str());
  }
  for (auto& p : params) {
    const auto& values = by_name.at(p.name)->values;
    auto dst = p.tensor.mutable_data();
    std::copy(values.begin(), values.end(), dst.begin());
  }
}

}  // namespace shnet
