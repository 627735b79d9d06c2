#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "shnet/tensor.hpp"

namespace shnet {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Interleaved 8-bit image, row-major.
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;
};

/// Reads binary PPM (P6), PGM (P5) or PNG (chosen by magic bytes).
Image8 read_image(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image8& image);
void write_pgm(const std::filesystem::path& path, const Image8& image);

/// [C x H x W] in [0, 1] from an 8-bit image; no mean/std normalization.
Tensor image_to_tensor(const Image8& image);
/// Binary [1 x H x W] mask: pixel > 127 -> 1.
Tensor mask_to_tensor(const Image8& image);
Image8 tensor_to_image(const Tensor& chw);

}  // namespace shnet
