#include "shnet/decoder.hpp"

#include <cstring>
#include <fstream>

#include "binary_io.hpp"
#include "shnet/image_io.hpp"
#include "shnet/ops.hpp"

namespace shnet {

namespace {

constexpr char kMaskMagic[] = "SHNETMASK";

}  // namespace

Aspp::Aspp(std::size_t c, Initializer& init) {
  for (std::size_t r = 0; r < kAsppRates.size(); ++r) {
    atrous_w[r] = init.he({c, c, 3, 3}, c * 9);
    atrous_b[r] = init.zeros({c});
  }
  pool_w = init.he({c, c, 1, 1}, c);
  pool_b = init.zeros({c});
  const std::size_t merged = c * (kAsppRates.size() + 1);
  fuse_w = init.he({c, merged, 1, 1}, merged);
  fuse_b = init.zeros({c});
}

std::vector<Tensor> Aspp::branches(const Tensor& x) const {
  std::vector<Tensor> out;
  for (std::size_t r = 0; r < kAsppRates.size(); ++r) {
    const std::size_t rate = kAsppRates[r];
    out.push_back(ops::relu(ops::conv2d(
        x, atrous_w[r], atrous_b[r],
        {.stride = 1, .pad = rate, .dilation = rate})));
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor pooled = ops::reshape(ops::mean(ops::reshape(x, {c, h * w}), 1), {c, 1, 1});
  Tensor projected = ops::relu(ops::conv2d(pooled, pool_w, pool_b));
  out.push_back(ops::expand(projected, {c, h, w}));
  return out;
}

Tensor Aspp::forward(const Tensor& x) const {
  return ops::relu(ops::conv2d(ops::concat(branches(x), 0), fuse_w, fuse_b));
}

void Aspp::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t r = 0; r < kAsppRates.size(); ++r) {
    const std::string tag = prefix + "rate" + std::to_string(kAsppRates[r]);
    out.push_back({tag + ".w", atrous_w[r], ParamRole::kWeight});
    out.push_back({tag + ".b", atrous_b[r], ParamRole::kNoDecay});
  }
  out.push_back({prefix + "pool.w", pool_w, ParamRole::kWeight});
  out.push_back({prefix + "pool.b", pool_b, ParamRole::kNoDecay});
  out.push_back({prefix + "fuse.w", fuse_w, ParamRole::kWeight});
  out.push_back({prefix + "fuse.b", fuse_b, ParamRole::kNoDecay});
}

MaskHead::MaskHead(const DecoderConfig& config, Initializer& init)
    : config_(config) {
  const std::size_t c0 = config.in_channels;
  const std::size_t c1 = config.stage1_channels;
  const std::size_t c2 = config.stage2_channels;
  up1_w = init.he({c1, c0, 3, 3}, c0 * 9);
  up1_b = init.zeros({c1});
  up2_w = init.he({c2, c1, 3, 3}, c1 * 9);
  up2_b = init.zeros({c2});
  out_w = init.xavier({1, c2, 1, 1}, c2, 1);
  out_b = init.zeros({1});
}

Tensor MaskHead::logits(const Tensor& decoded) const {
  const std::size_t h = decoded.dim(1), w = decoded.dim(2);
  Tensor x = ops::bilinear_upsample(decoded, 2 * h, 2 * w);
  x = ops::relu(ops::conv2d(x, up1_w, up1_b, {.stride = 1, .pad = 1}));
  x = ops::bilinear_upsample(x, 4 * h, 4 * w);
  x = ops::relu(ops::conv2d(x, up2_w, up2_b, {.stride = 1, .pad = 1}));
  x = ops::bilinear_upsample(x, config_.resolution, config_.resolution);
  return ops::conv2d(x, out_w, out_b);
}

Tensor MaskHead::forward(const Tensor& decoded) const {
  return ops::sigmoid(logits(decoded));
}

void MaskHead::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "up1.w", up1_w, ParamRole::kWeight});
  out.push_back({prefix + "up1.b", up1_b, ParamRole::kNoDecay});
  out.push_back({prefix + "up2.w", up2_w, ParamRole::kWeight});
  out.push_back({prefix + "up2.b", up2_b, ParamRole::kNoDecay});
  out.push_back({prefix + "out.w", out_w, ParamRole::kWeight});
  out.push_back({prefix + "out.b", out_b, ParamRole::kNoDecay});
}

Tensor mask_loss(const Tensor& probs, const Tensor& target) {
  return ops::bce_loss(probs, target);
}

void write_mask_pgm(const std::string& path, const Tensor& probs) {
  if (probs.rank() != 3 || probs.dim(0) != 1) {
    throw ShapeError("write_mask_pgm: expected [1 x H x W], got " +
                     shape_str(probs.shape()));
  }
  Image8 image;
  image.channels = 1;
  image.height = probs.dim(1);
  image.width = probs.dim(2);
  image.pixels.resize(probs.numel());
  const auto d = probs.data();
  for (std::size_t i = 0; i < d.size(); ++i) image.pixels[i] = d[i] > 0.5 ? 255 : 0;
  write_pgm(path, image);
}

void write_probability_dump(const std::string& path, const Tensor& probs) {
  if (probs.rank() != 3 || probs.dim(0) != 1) {
    throw ShapeError("write_probability_dump: expected [1 x H x W], got " +
                     shape_str(probs.shape()));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageError("cannot write " + path);
  out.write(kMaskMagic, static_cast<std::streamsize>(std::strlen(kMaskMagic)));
  io::write_u32(out, static_cast<std::uint32_t>(probs.dim(1)));
  io::write_u32(out, static_cast<std::uint32_t>(probs.dim(2)));
  for (double v : probs.data()) io::write_f64(out, v);
}

Tensor read_probability_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path);
  std::string magic(std::strlen(kMaskMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  std::uint32_t h = 0, w = 0;
  if (!in || magic != kMaskMagic || !io::read_u32(in, h) || !io::read_u32(in, w) ||
      h == 0 || w == 0) {
    throw ImageError(path + " is not a SHNETMASK dump");
  }
  std::vector<double> values(static_cast<std::size_t>(h) * w);
  for (auto& v : values) {
    if (!io::read_f64(in, v)) throw ImageError(path + ": truncated dump");
  }
  return Tensor::from({1, h, w}, std::move(values));
}

}  // namespace shnet
