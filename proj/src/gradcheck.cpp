#include "shnet/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "shnet/backbone.hpp"
#include "shnet/decoder.hpp"
#include "shnet/hcam.hpp"
#include "shnet/image_io.hpp"
#include "shnet/model.hpp"
#include "shnet/ops.hpp"
#include "shnet/sfm.hpp"
#include "shnet/synth_data.hpp"
#include "shnet/text_encoder.hpp"

namespace shnet::check {

namespace {

double relative_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Random inputs for one configuration.
class Gen {
 public:
  Gen(std::uint64_t seed, std::size_t index)
      : rng_(seed), init_(seed ^ 0xabcdefULL), index_(index) {}

  /// Position of this configuration within its case.
  std::size_t index() const { return index_; }

  std::size_t size(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  bool coin() { return size(0, 1) == 1; }

  Tensor leaf(const Shape& shape, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = uniform(lo, hi);
    return Tensor::from(shape, std::move(v), true);
  }
  /// Values bounded away from zero, for relu inputs.
  Tensor away_from_zero(const Shape& shape) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = (coin() ? 1.0 : -1.0) * uniform(0.05, 1.0);
    return Tensor::from(shape, std::move(v), true);
  }
  /// Distinct values at least 1e-2 apart, for max pooling.
  Tensor distinct(const Shape& shape) {
    std::vector<double> v(shape_numel(shape));
    std::iota(v.begin(), v.end(), 0.0);
    std::shuffle(v.begin(), v.end(), rng_);
    for (auto& x : v) x = x * 1e-2 - 0.5;
    return Tensor::from(shape, std::move(v), true);
  }
  Shape shape(std::size_t rank, std::size_t lo, std::size_t hi) {
    Shape s(rank);
    for (auto& d : s) d = size(lo, hi);
    return s;
  }

  std::mt19937_64& rng() { return rng_; }
  Initializer& init() { return init_; }

 private:
  std::mt19937_64 rng_;
  Initializer init_;
  std::size_t index_;
};

// Reduces any tensor to a scalar with fixed random weights, so every output
// element contributes a distinct amount.
std::function<Tensor()> weighted_sum(std::function<Tensor()> f, Gen& gen) {
  NoGradGuard guard;
  const Shape shape = f().shape();
  Tensor weights = gen.leaf(shape);
  weights.set_requires_grad(false);
  return [f = std::move(f), weights] { return ops::sum(ops::mul(f(), weights)); };
}

// Freshly initialized biases are exactly zero, which parks relus of dead
// channels exactly on their kink. Offsets are redrawn before probing.
std::vector<Tensor> trainable(const ParamList& params, Gen& gen) {
  std::vector<Tensor> out;
  for (const auto& p : params) {
    if (!p.tensor.requires_grad()) continue;
    if (p.role == ParamRole::kNoDecay) {
      Tensor t = p.tensor;
      for (auto& v : t.mutable_data()) v = gen.uniform(-0.5, 0.5);
    }
    out.push_back(p.tensor);
  }
  return out;
}

struct Case {
  std::string module;
  std::string name;
  // Builds one random configuration: objective and the tensors to probe.
  std::function<std::pair<std::function<Tensor()>, std::vector<Tensor>>(Gen&)> build;
};

using Built = std::pair<std::function<Tensor()>, std::vector<Tensor>>;

Built elementwise(Gen& g, Tensor (*op)(const Tensor&, const Tensor&)) {
  const std::size_t rank = g.size(1, 3);
  Shape a = g.shape(rank, 1, 4), b = a;
  for (std::size_t i = 0; i < rank; ++i) {
    if (g.size(0, 3) == 0) a[i] = 1;
    else if (g.size(0, 3) == 0) b[i] = 1;
  }
  Tensor x = g.leaf(a), y = g.leaf(b);
  return {weighted_sum([=] { return op(x, y); }, g), {x, y}};
}

Built unary(Gen& g, Tensor (*op)(const Tensor&), bool kink_free) {
  const Shape s = g.shape(g.size(1, 3), 1, 5);
  Tensor x = kink_free ? g.away_from_zero(s) : g.leaf(s, -3.0, 3.0);
  return {weighted_sum([=] { return op(x); }, g), {x}};
}

std::vector<Case> tensor_core_cases() {
  std::vector<Case> c;
  const std::string m = "tensor-core";
  c.push_back({m, "add", [](Gen& g) { return elementwise(g, ops::add); }});
  c.push_back({m, "sub", [](Gen& g) { return elementwise(g, ops::sub); }});
  c.push_back({m, "mul", [](Gen& g) { return elementwise(g, ops::mul); }});
  c.push_back({m, "scale", [](Gen& g) {
                 Tensor x = g.leaf(g.shape(2, 1, 5));
                 const double k = g.uniform(-2, 2);
                 return Built{weighted_sum([=] { return ops::scale(x, k); }, g), {x}};
               }});
  c.push_back({m, "add_scalar", [](Gen& g) {
                 Tensor x = g.leaf(g.shape(2, 1, 5));
                 const double k = g.uniform(-2, 2);
                 return Built{weighted_sum([=] { return ops::add_scalar(x, k); }, g), {x}};
               }});
  c.push_back({m, "sigmoid", [](Gen& g) { return unary(g, ops::sigmoid, false); }});
  c.push_back({m, "tanh", [](Gen& g) { return unary(g, ops::tanh, false); }});
  c.push_back({m, "relu", [](Gen& g) { return unary(g, ops::relu, true); }});
  c.push_back({m, "sum", [](Gen& g) { return unary(g, ops::sum, false); }});
  c.push_back({m, "mean_all", [](Gen& g) { return unary(g, ops::mean_all, false); }});
  c.push_back({m, "mean", [](Gen& g) {
                 const std::size_t rank = g.size(1, 3);
                 Tensor x = g.leaf(g.shape(rank, 1, 5));
                 const std::size_t axis = g.size(0, rank - 1);
                 return Built{weighted_sum([=] { return ops::mean(x, axis); }, g), {x}};
               }});
  c.push_back({m, "reshape", [](Gen& g) {
                 const std::size_t a = g.size(1, 4), b = g.size(1, 4), d = g.size(1, 3);
                 Tensor x = g.leaf({a, b * d});
                 return Built{weighted_sum([=] { return ops::reshape(x, {a * b, d}); }, g), {x}};
               }});
  c.push_back({m, "transpose", [](Gen& g) {
                 Tensor x = g.leaf(g.shape(2, 1, 6));
                 return Built{weighted_sum([=] { return ops::transpose(x); }, g), {x}};
               }});
  c.push_back({m, "concat", [](Gen& g) {
                 const std::size_t rank = g.size(1, 3);
                 const std::size_t axis = g.size(0, rank - 1);
                 Shape base = g.shape(rank, 1, 4);
                 std::vector<Tensor> parts;
                 const std::size_t n = g.size(1, 3);
                 for (std::size_t i = 0; i < n; ++i) {
                   Shape s = base;
                   s[axis] = g.size(1, 4);
                   parts.push_back(g.leaf(s));
                 }
                 return Built{weighted_sum([=] { return ops::concat(parts, axis); }, g), parts};
               }});
  c.push_back({m, "slice", [](Gen& g) {
                 const std::size_t rank = g.size(1, 3);
                 Shape s = g.shape(rank, 2, 5);
                 const std::size_t axis = g.size(0, rank - 1);
                 const std::size_t start = g.size(0, s[axis] - 1);
                 const std::size_t len = g.size(1, s[axis] - start);
                 Tensor x = g.leaf(s);
                 return Built{weighted_sum([=] { return ops::slice(x, axis, start, len); }, g), {x}};
               }});
  c.push_back({m, "expand", [](Gen& g) {
                 const std::size_t rank = g.size(1, 3);
                 Shape to = g.shape(rank, 1, 4), from = to;
                 for (auto& d : from)
                   if (g.coin()) d = 1;
                 Tensor x = g.leaf(from);
                 return Built{weighted_sum([=] { return ops::expand(x, to); }, g), {x}};
               }});
  c.push_back({m, "gather_rows", [](Gen& g) {
                 const std::size_t rows = g.size(2, 6);
                 Tensor table = g.leaf({rows, g.size(1, 4)});
                 std::vector<std::size_t> idx(g.size(1, 7));
                 for (auto& i : idx) i = g.size(0, rows - 1);
                 return Built{weighted_sum([=] { return ops::gather_rows(table, idx); }, g), {table}};
               }});
  c.push_back({m, "matmul", [](Gen& g) {
                 const std::size_t a = g.size(1, 5), b = g.size(1, 5), d = g.size(1, 5);
                 Tensor x = g.leaf({a, b}), y = g.leaf({b, d});
                 return Built{weighted_sum([=] { return ops::matmul(x, y); }, g), {x, y}};
               }});
  c.push_back({m, "softmax", [](Gen& g) {
                 Tensor x = g.leaf(g.shape(g.size(1, 3), 1, 5), -3, 3);
                 return Built{weighted_sum([=] { return ops::softmax(x); }, g), {x}};
               }});
  c.push_back({m, "layer_norm", [](Gen& g) {
                 const std::size_t ch = g.size(2, 6), s = g.size(1, 5);
                 Tensor x = g.leaf({ch, s}, -2, 2);
                 Tensor gamma = g.leaf({ch}, 0.5, 1.5), beta = g.leaf({ch});
                 return Built{weighted_sum([=] { return ops::layer_norm(x, gamma, beta); }, g),
                              {x, gamma, beta}};
               }});
  c.push_back({m, "conv2d", [](Gen& g) {
                 const std::size_t k = g.size(1, 3), stride = g.size(1, 2);
                 const std::size_t dil = g.size(1, 2), pad = g.size(0, 2);
                 const std::size_t span = dil * (k - 1) + 1;
                 const std::size_t oh = g.size(1, 4), ow = g.size(1, 4);
                 // Input extents that make the output exactly oh x ow.
                 const long h = static_cast<long>((oh - 1) * stride + span) - 2 * static_cast<long>(pad);
                 const long w = static_cast<long>((ow - 1) * stride + span) - 2 * static_cast<long>(pad);
                 if (h < 1 || w < 1) return Built{};
                 Tensor x = g.leaf({g.size(1, 3), static_cast<std::size_t>(h),
                                    static_cast<std::size_t>(w)});
                 Tensor wt = g.leaf({g.size(1, 3), x.dim(0), k, k});
                 Tensor b = g.coin() ? g.leaf({wt.dim(0)}) : Tensor();
                 std::vector<Tensor> in{x, wt};
                 if (b.defined()) in.push_back(b);
                 const ops::Conv2dOptions opt{stride, pad, dil};
                 return Built{weighted_sum([=] { return ops::conv2d(x, wt, b, opt); }, g), in};
               }});
  c.push_back({m, "conv3d", [](Gen& g) {
                 const std::size_t kd = g.size(1, 3), kh = g.size(1, 3);
                 const std::size_t pd = g.size(0, kd / 2), ph = g.size(0, kh / 2);
                 const std::size_t stride = g.size(1, 2);
                 const std::size_t od = g.size(1, 2), oh = g.size(1, 3);
                 const long d = static_cast<long>(od - 1 + kd) - 2 * static_cast<long>(pd);
                 const long hl = static_cast<long>((oh - 1) * stride + kh) - 2 * static_cast<long>(ph);
                 if (d < 1 || hl < 1) return Built{};
                 const std::size_t h = static_cast<std::size_t>(hl);
                 Tensor x = g.leaf({g.size(1, 3), static_cast<std::size_t>(d), h, h});
                 Tensor wt = g.leaf({g.size(1, 3), x.dim(0), kd, kh, kh});
                 Tensor b = g.leaf({wt.dim(0)});
                 ops::Conv3dOptions opt;
                 opt.stride_h = opt.stride_w = stride;
                 opt.pad_d = pd;
                 opt.pad_h = opt.pad_w = ph;
                 return Built{weighted_sum([=] { return ops::conv3d(x, wt, b, opt); }, g),
                              {x, wt, b}};
               }});
  c.push_back({m, "max_pool2d", [](Gen& g) {
                 const std::size_t k = g.size(1, 3), s = g.size(1, 3);
                 const std::size_t o = g.size(1, 3);
                 const std::size_t h = (o - 1) * s + k;
                 Tensor x = g.distinct({g.size(1, 3), h, h});
                 return Built{weighted_sum([=] { return ops::max_pool2d(x, k, s); }, g), {x}};
               }});
  c.push_back({m, "avg_pool2d", [](Gen& g) {
                 const std::size_t k = g.size(1, 3), s = g.size(1, 3);
                 const std::size_t o = g.size(1, 3);
                 const std::size_t h = (o - 1) * s + k;
                 Tensor x = g.leaf({g.size(1, 3), h, h});
                 return Built{weighted_sum([=] { return ops::avg_pool2d(x, k, s); }, g), {x}};
               }});
  c.push_back({m, "adaptive_avg_pool2d", [](Gen& g) {
                 Tensor x = g.leaf({g.size(1, 3), g.size(1, 7), g.size(1, 7)});
                 const std::size_t oh = g.size(1, 6), ow = g.size(1, 6);
                 return Built{
                     weighted_sum([=] { return ops::adaptive_avg_pool2d(x, oh, ow); }, g), {x}};
               }});
  c.push_back({m, "bilinear_upsample", [](Gen& g) {
                 Tensor x = g.leaf({g.size(1, 3), g.size(1, 5), g.size(1, 5)});
                 const std::size_t oh = g.size(1, 9), ow = g.size(1, 9);
                 return Built{
                     weighted_sum([=] { return ops::bilinear_upsample(x, oh, ow); }, g), {x}};
               }});
  c.push_back({m, "bce_loss", [](Gen& g) {
                 const Shape s = g.shape(g.size(1, 3), 1, 5);
                 Tensor p = g.leaf(s, 0.05, 0.95);
                 std::vector<double> t(p.numel());
                 for (auto& v : t) v = g.coin() ? 1.0 : 0.0;
                 Tensor target = Tensor::from(s, std::move(t));
                 return Built{[=] { return ops::bce_loss(p, target); }, {p}};
               }});
  return c;
}

std::vector<Case> text_cases() {
  return {{"text-encoder", "lstm_encoder", [](Gen& g) {
             const std::size_t vocab = g.size(3, 8), d = g.size(2, 5), hidden = g.size(2, 5);
             Tensor table = g.leaf({vocab, d});
             auto lstm = std::make_shared<LstmEncoder>(d, hidden, g.init());
             std::vector<std::size_t> tokens(g.size(1, 6));
             for (auto& t : tokens) t = g.size(0, vocab - 1);
             ParamList params;
             lstm->collect(params, "");
             auto in = trainable(params, g);
             in.push_back(table);
             const bool final_only = g.coin();
             return Built{weighted_sum(
                              [=] {
                                auto wf = lstm->encode(table, tokens);
                                return final_only ? wf.final_state : wf.features;
                              },
                              g),
                          in};
           }}};
}

std::vector<Case> backbone_cases() {
  return {{"visual-backbone", "backbone", [](Gen& g) {
             BackboneConfig cfg;
             cfg.resolution = 16 * g.size(1, 2);
             cfg.channels = g.size(2, 4);
             cfg.feature_size = g.size(1, 3);
             cfg.widths = {2, 3, 3, 4};
             auto net = std::make_shared<VisualBackbone>(cfg, g.init());
             Tensor image = g.leaf({3, cfg.resolution, cfg.resolution}, 0, 1);
             ParamList params;
             net->collect(params, "");
             auto in = trainable(params, g);
             in.push_back(image);
             return Built{weighted_sum(
                              [=] {
                                auto f = net->extract(image);
                                return ops::concat({ops::reshape(f.levels[0], {f.levels[0].numel()}),
                                                    ops::reshape(f.levels[1], {f.levels[1].numel()}),
                                                    ops::reshape(f.levels[2], {f.levels[2].numel()})},
                                                   0);
                              },
                              g),
                          in};
           }}};
}

std::vector<Case> sfm_cases() {
  std::vector<Case> c;
  const std::string m = "sfm";
  c.push_back({m, "fuse_tokens", [](Gen& g) {
                 const std::size_t ch = g.size(2, 5), h = g.size(1, 3), t = g.size(1, 4);
                 const std::size_t tmax = t + g.size(0, 2);
                 Tensor v = g.leaf({ch, h, h}), l = g.leaf({ch, t});
                 Tensor gamma = g.leaf({ch}, 0.5, 1.5), beta = g.leaf({ch});
                 Tensor pv = g.leaf({ch, h * h}), pl = g.leaf({ch, tmax});
                 return Built{weighted_sum(
                                  [=] { return fuse_tokens(v, l, gamma, beta, pv, pl).tokens; }, g),
                              {v, l, gamma, beta, pv, pl}};
               }});
  c.push_back({m, "multi_head_attention", [](Gen& g) {
                 const std::size_t heads = g.size(1, 3), d = g.size(1, 3);
                 const std::size_t ch = heads * d, s = g.size(1, 6);
                 Tensor x = g.leaf({ch, s});
                 AttentionParams p;
                 p.heads = heads;
                 p.w_query = g.leaf({ch, ch});
                 p.w_key = g.leaf({ch, ch});
                 p.w_value = g.leaf({ch, ch});
                 p.w_output = g.leaf({ch, ch});
                 AttentionOptions opt;
                 opt.residual = g.coin();
                 return Built{weighted_sum([=] { return multi_head_attention(x, p, opt); }, g),
                              {x, p.w_query, p.w_key, p.w_value, p.w_output}};
               }});
  c.push_back({m, "sfm_level", [](Gen& g) {
                 SfmConfig cfg;
                 cfg.heads = g.size(1, 2);
                 cfg.channels = cfg.heads * g.size(1, 3);
                 cfg.feature_size = g.size(1, 3);
                 cfg.max_words = 6;
                 cfg.positional = g.coin();
                 auto level = std::make_shared<SfmLevel>(cfg, g.init());
                 Tensor v = g.leaf({cfg.channels, cfg.feature_size, cfg.feature_size});
                 Tensor l = g.leaf({cfg.channels, g.size(1, 6)});
                 ParamList params;
                 level->collect(params, "");
                 auto in = trainable(params, g);
                 in.push_back(v);
                 in.push_back(l);
                 return Built{weighted_sum([=] { return level->forward(v, l).tokens; }, g), in};
               }});
  return c;
}

std::vector<Case> hcam_cases() {
  std::vector<Case> c;
  const std::string m = "hcam";
  c.push_back({m, "affinity", [](Gen& g) {
                 const std::size_t cv = g.size(1, 4), cl = g.size(1, 4), h = g.size(1, 4);
                 const std::size_t k = g.coin() ? 1 : 3;
                 Tensor v = g.leaf({cv, h, h}), ctx = g.leaf({cl});
                 Tensor w = g.leaf({cv, cv + cl, k, k}), b = g.leaf({cv});
                 return Built{weighted_sum([=] { return affinity(v, ctx, w, b); }, g),
                              {v, ctx, w, b}};
               }});
  c.push_back({m, "linguistic_context", [](Gen& g) {
                 Tensor l = g.leaf({g.size(1, 5), g.size(1, 6)});
                 return Built{weighted_sum([=] { return linguistic_context(l); }, g), {l}};
               }});
  c.push_back({m, "aggregate_levels", [](Gen& g) {
                 const Shape s{g.size(1, 4), g.size(1, 4), g.size(1, 4)};
                 std::array<Tensor, 3> v{g.leaf(s), g.leaf(s), g.leaf(s)};
                 AffinityStack gates;
                 std::vector<Tensor> in{v[0], v[1], v[2]};
                 for (std::size_t i = 0; i < 3; ++i)
                   for (std::size_t j = 0; j < 3; ++j)
                     if (i != j) {
                       gates.gates[i][j] = g.leaf(s, 0, 1);
                       in.push_back(gates.gates[i][j]);
                     }
                 return Built{weighted_sum(
                                  [=] {
                                    auto out = aggregate_levels(v, gates);
                                    return stack_levels(out);
                                  },
                                  g),
                              in};
               }});
  c.push_back({m, "fuse_depth", [](Gen& g) {
                 const Shape s{g.size(1, 3), g.size(1, 4), g.size(1, 4)};
                 std::array<Tensor, 3> v{g.leaf(s), g.leaf(s), g.leaf(s)};
                 Tensor w = g.leaf({g.size(1, 3), s[0], 3, 3, 3}), b = g.leaf({w.dim(0)});
                 return Built{weighted_sum([=] { return fuse_depth(v, w, b); }, g),
                              {v[0], v[1], v[2], w, b}};
               }});
  c.push_back({m, "hcam", [](Gen& g) {
                 HcamConfig cfg;
                 cfg.visual_channels = g.size(1, 4);
                 cfg.context_channels = g.size(1, 4);
                 cfg.out_channels = g.size(1, 4);
                 cfg.affinity_kernel = g.coin() ? 1 : 3;
                 auto hcam = std::make_shared<Hcam>(cfg, g.init());
                 const std::size_t h = g.size(1, 4);
                 std::array<LevelSplit, 3> levels;
                 ParamList params;
                 hcam->collect(params, "");
                 auto in = trainable(params, g);
                 for (auto& lv : levels) {
                   lv.visual = g.leaf({cfg.visual_channels, h, h});
                   lv.words = g.leaf({cfg.context_channels, g.size(1, 5)});
                   in.push_back(lv.visual);
                   in.push_back(lv.words);
                 }
                 return Built{weighted_sum([=] { return hcam->forward(levels); }, g), in};
               }});
  return c;
}

std::vector<Case> decoder_cases() {
  std::vector<Case> c;
  const std::string m = "decoder-loss";
  c.push_back({m, "aspp", [](Gen& g) {
                 const std::size_t ch = g.size(1, 4), h = g.size(6, 9);
                 auto aspp = std::make_shared<Aspp>(ch, g.init());
                 Tensor x = g.leaf({ch, h, h});
                 ParamList params;
                 aspp->collect(params, "");
                 auto in = trainable(params, g);
                 in.push_back(x);
                 return Built{weighted_sum([=] { return aspp->forward(x); }, g), in};
               }});
  c.push_back({m, "mask_head", [](Gen& g) {
                 DecoderConfig cfg;
                 cfg.in_channels = g.size(1, 4);
                 cfg.stage1_channels = g.size(1, 3);
                 cfg.stage2_channels = g.size(1, 3);
                 const std::size_t h = g.size(1, 3);
                 cfg.resolution = 8 * h;
                 auto head = std::make_shared<MaskHead>(cfg, g.init());
                 Tensor x = g.leaf({cfg.in_channels, h, h});
                 ParamList params;
                 head->collect(params, "");
                 auto in = trainable(params, g);
                 in.push_back(x);
                 return Built{weighted_sum([=] { return head->forward(x); }, g), in};
               }});
  c.push_back({m, "decoder_bce", [](Gen& g) {
                 DecoderConfig cfg;
                 cfg.in_channels = g.size(1, 4);
                 cfg.stage1_channels = 2;
                 cfg.stage2_channels = 2;
                 cfg.resolution = 16;
                 auto dec = std::make_shared<Decoder>(cfg, g.init());
                 Tensor x = g.leaf({cfg.in_channels, 2, 2});
                 std::vector<double> t(cfg.resolution * cfg.resolution);
                 for (auto& v : t) v = g.coin() ? 1.0 : 0.0;
                 Tensor target = Tensor::from({1, cfg.resolution, cfg.resolution}, std::move(t));
                 ParamList params;
                 dec->collect(params, "");
                 auto in = trainable(params, g);
                 in.push_back(x);
                 return Built{[=] { return mask_loss(dec->forward(x), target); }, in};
               }});
  return c;
}

std::vector<Case> model_cases() {
  return {{"model", "model", [](Gen& g) {
             ModelConfig cfg;
             cfg.variant = kAllVariants[g.index() % kAllVariants.size()];
             cfg.resolution = 16;
             cfg.channels = 4;
             cfg.heads = 2;
             cfg.embed_dim = 3;
             cfg.seed = g.size(0, 1u << 30);
             auto model = std::make_shared<Model>(cfg, synth::grammar_vocabulary());
             auto sample = synth::generate_train(g.size(0, 1u << 30), 16);
             Tensor image = image_to_tensor(sample.image);
             Tensor mask = mask_to_tensor(sample.mask);
             const auto tokens = synth::grammar_vocabulary().encode(sample.tokens);
             return Built{[=] { return mask_loss(model->forward(image, tokens), mask); },
                          trainable(model->parameters(), g)};
           }}};
}

std::vector<Case> all_cases() {
  std::vector<Case> out;
  for (auto&& group : {tensor_core_cases(), text_cases(), backbone_cases(), sfm_cases(),
                       hcam_cases(), decoder_cases(), model_cases()}) {
    out.insert(out.end(), group.begin(), group.end());
  }
  return out;
}

}  // namespace

CheckStats check_gradients(const std::function<Tensor()>& f,
                           const std::vector<Tensor>& inputs,
                           const GradcheckOptions& options, std::mt19937_64& rng) {
  std::vector<Tensor> probe = inputs;
  for (auto& t : probe) t.zero_grad();
  backward(f());
  std::vector<std::vector<double>> analytic;
  for (auto& t : probe) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }

  NoGradGuard guard;
  const double f0 = f().item();
  const double h = options.step;
  CheckStats stats;
  for (std::size_t ti = 0; ti < probe.size(); ++ti) {
    Tensor& t = probe[ti];
    std::vector<std::size_t> coords(t.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.coords_per_tensor);
    }
    for (std::size_t k : coords) {
      auto data = t.mutable_data();
      const double orig = data[k];
      auto at = [&](double offset) {
        data[k] = orig + offset;
        const double v = f().item();
        data[k] = orig;
        return v;
      };
      // Spread of the one-sided slopes at steps h, h/2, h/4. On a smooth
      // function it halves with the step; a kink inside the bracket breaks
      // that scaling.
      std::array<double, 3> spread{};
      double numeric = 0.0;
      for (std::size_t level = 0; level < 3; ++level) {
        const double s = h / static_cast<double>(1u << level);
        const double fp = at(s), fm = at(-s);
        if (level == 0) numeric = (fp - fm) / (2.0 * h);
        spread[level] = std::abs((fp - f0) / s - (f0 - fm) / s);
      }
      ++stats.probed;
      // Rounding in f shows up in each slope as ~eps * |f| / step.
      const double noise = 256.0 * std::numeric_limits<double>::epsilon() *
                           std::max(1.0, std::abs(f0)) / (h / 4.0);
      const bool smooth =
          std::abs(spread[0] - 2.0 * spread[1]) <= 0.25 * spread[0] + noise &&
          std::abs(spread[1] - 2.0 * spread[2]) <= 0.25 * spread[1] + noise;
      if (!smooth) {
        ++stats.kinks;
        continue;
      }
      stats.max_rel_error = std::max(
          stats.max_rel_error, relative_error(analytic[ti][k], numeric, options.floor));
    }
  }
  return stats;
}

const std::vector<std::string>& gradcheck_modules() {
  static const std::vector<std::string> modules{
      "tensor-core", "text-encoder", "visual-backbone", "sfm", "hcam", "decoder-loss", "model"};
  return modules;
}

std::vector<CaseResult> run_gradcheck(const std::vector<std::string>& modules,
                                      const GradcheckOptions& options) {
  for (const auto& m : modules) {
    const auto& known = gradcheck_modules();
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw UsageError("unknown gradcheck module '" + m + "'");
    }
  }
  std::vector<CaseResult> results;
  std::uint64_t case_index = 0;
  for (const auto& c : all_cases()) {
    ++case_index;
    if (!modules.empty() &&
        std::find(modules.begin(), modules.end(), c.module) == modules.end()) {
      continue;
    }
    CaseResult r;
    r.module = c.module;
    r.name = c.name;
    std::mt19937_64 rng(options.seed * 1000003ULL + case_index);
    std::uint64_t attempt = 0;
    while (r.configs < options.configs) {
      Gen gen(rng() ^ attempt++, r.configs);
      Built built;
      try {
        built = c.build(gen);
      } catch (const std::exception& e) {
        throw UsageError(c.module + "/" + c.name + ": " + e.what());
      }
      if (!built.first) continue;  // geometry draw was infeasible
      const CheckStats s = check_gradients(built.first, built.second, options, gen.rng());
      r.max_rel_error = std::max(r.max_rel_error, s.max_rel_error);
      r.probed += s.probed;
      r.kinks += s.kinks;
      ++r.configs;
    }
    r.passed = r.max_rel_error <= options.tolerance &&
               static_cast<double>(r.kinks) <= 0.05 * static_cast<double>(r.probed);
    results.push_back(r);
  }
  return results;
}

std::string format_table(const std::vector<CaseResult>& results) {
  std::ostringstream os;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-16s %-22s %7s %7s %6s %13s  %s\n", "module", "case",
                "configs", "probed", "kinks", "max_rel_err", "result");
  os << buf;
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-16s %-22s %7zu %7zu %6zu %13.3e  %s\n",
                  r.module.c_str(), r.name.c_str(), r.configs, r.probed, r.kinks,
                  r.max_rel_error, r.passed ? "PASS" : "FAIL");
    os << buf;
  }
  return os.str();
}

}  // namespace shnet::check
