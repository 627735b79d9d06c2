#include "shnet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

namespace shnet {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

Image8 read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw ImageError("cannot open " + path.string());
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("libpng initialization failed");
  }
  Image8 image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("corrupt PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  image.width = png_get_image_width(png, info);
  image.height = png_get_image_height(png, info);
  image.channels = png_get_channels(png, info);
  if (image.channels != 1 && image.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("unsupported PNG channel count in " + path.string());
  }
  image.pixels.resize(image.width * image.height * image.channels);
  std::vector<png_bytep> rows(image.height);
  for (std::size_t y = 0; y < image.height; ++y)
    rows[y] = image.pixels.data() + y * image.width * image.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

// Skips whitespace and '#' comments in a netpbm header.
std::size_t read_header_int(std::istream& in) {
  int ch = in.peek();
  while (ch != EOF) {
    if (std::isspace(ch)) {
      in.get();
    } else if (ch == '#') {
      std::string discard;
      std::getline(in, discard);
    } else {
      break;
    }
    ch = in.peek();
  }
  std::size_t value = 0;
  if (!(in >> value)) throw ImageError("malformed netpbm header");
  return value;
}

Image8 read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  char magic[2];
  in.read(magic, 2);
  Image8 image;
  if (magic[0] == 'P' && magic[1] == '6') {
    image.channels = 3;
  } else if (magic[0] == 'P' && magic[1] == '5') {
    image.channels = 1;
  } else {
    throw ImageError(path.string() + ": unsupported image format");
  }
  image.width = read_header_int(in);
  image.height = read_header_int(in);
  const std::size_t maxval = read_header_int(in);
  if (maxval != 255) {
    throw ImageError(path.string() + ": only 8-bit netpbm is supported");
  }
  in.get();  // single whitespace before the raster
  image.pixels.resize(image.width * image.height * image.channels);
  in.read(reinterpret_cast<char*>(image.pixels.data()),
          static_cast<std::streamsize>(image.pixels.size()));
  if (!in) throw ImageError(path.string() + ": truncated raster");
  return image;
}

void write_netpbm(const std::filesystem::path& path, const Image8& image,
                  const char* magic, std::size_t channels) {
  if (image.channels != channels) {
    throw ImageError("write " + path.string() + ": expected " +
                     std::to_string(channels) + " channels, image has " +
                     std::to_string(image.channels));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageError("cannot write " + path.string());
  out << magic << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

}  // namespace

Image8 read_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw ImageError("cannot open " + path.string());
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), 8);
  probe.close();
  if (png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  return read_netpbm(path);
}

void write_ppm(const std::filesystem::path& path, const Image8& image) {
  write_netpbm(path, image, "P6", 3);
}

void write_pgm(const std::filesystem::path& path, const Image8& image) {
  write_netpbm(path, image, "P5", 1);
}

Tensor image_to_tensor(const Image8& image) {
  const std::size_t c = image.channels, h = image.height, w = image.width;
  std::vector<double> values(c * h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        values[(ch * h + y) * w + x] =
            image.pixels[(y * w + x) * c + ch] / 255.0;
  return Tensor::from({c, h, w}, std::move(values));
}

Tensor mask_to_tensor(const Image8& image) {
  const std::size_t c = image.channels, h = image.height, w = image.width;
  std::vector<double> values(h * w);
  for (std::size_t i = 0; i < h * w; ++i)
    values[i] = image.pixels[i * c] > 127 ? 1.0 : 0.0;
  return Tensor::from({1, h, w}, std::move(values));
}

Image8 tensor_to_image(const Tensor& chw) {
  if (chw.rank() != 3 || (chw.dim(0) != 1 && chw.dim(0) != 3)) {
    throw ImageError("tensor_to_image: expected [1|3 x H x W], got " +
                     shape_str(chw.shape()));
  }
  Image8 image;
  image.channels = chw.dim(0);
  image.height = chw.dim(1);
  image.width = chw.dim(2);
  image.pixels.resize(chw.numel());
  const auto d = chw.data();
  const std::size_t c = image.channels, h = image.height, w = image.width;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v = std::clamp(d[(ch * h + y) * w + x], 0.0, 1.0);
        image.pixels[(y * w + x) * c + ch] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return image;
}

}  // namespace shnet
