#include "shnet/hcam.hpp"

#include "shnet/ops.hpp"

namespace shnet {

namespace {

constexpr const char* kLevelNames[3] = {"2", "3", "4"};

}  // namespace

Tensor linguistic_context(const Tensor& words) {
  if (words.rank() != 2) {
    throw ShapeError("linguistic_context: expected [C x T], got " +
                     shape_str(words.shape()));
  }
  return ops::reshape(ops::mean(words, 1), {words.dim(0)});
}

Tensor affinity(const Tensor& visual, const Tensor& context, const Tensor& w,
                const Tensor& b) {
  const std::size_t h = visual.dim(1), wd = visual.dim(2);
  const std::size_t cc = context.numel();
  Tensor tiled = ops::expand(ops::reshape(context, {cc, 1, 1}), {cc, h, wd});
  Tensor joint = ops::concat({visual, tiled}, 0);
  const std::size_t k = w.dim(2);
  return ops::sigmoid(ops::conv2d(joint, w, b, {.stride = 1, .pad = k / 2}));
}

std::array<Tensor, 3> aggregate_levels(const std::array<Tensor, 3>& visual,
                                       const AffinityStack& gates) {
  std::array<Tensor, 3> out;
  for (std::size_t i = 0; i < 3; ++i) {
    Tensor g = visual[i];
    for (std::size_t j = 0; j < 3; ++j) {
      if (j == i) continue;
      g = ops::add(g, ops::mul(gates.gates[i][j], visual[j]));
    }
    out[i] = g;
  }
  return out;
}

Tensor stack_levels(const std::array<Tensor, 3>& maps) {
  std::vector<Tensor> parts;
  for (const auto& m : maps) {
    parts.push_back(ops::reshape(m, {m.dim(0), 1, m.dim(1), m.dim(2)}));
  }
  return ops::concat(parts, 1);
}

Tensor fuse_depth(const std::array<Tensor, 3>& maps, const Tensor& w,
                  const Tensor& b) {
  Tensor stacked = stack_levels(maps);
  const std::size_t k = w.dim(3);
  Tensor fused = ops::conv3d(stacked, w, b,
                             {.pad_d = 0, .pad_h = k / 2, .pad_w = k / 2});
  return ops::reshape(fused, {fused.dim(0), fused.dim(2), fused.dim(3)});
}

Hcam::Hcam(const HcamConfig& config, Initializer& init) : config_(config) {
  const std::size_t cv = config.visual_channels;
  const std::size_t in = cv + config.context_channels;
  const std::size_t k = config.affinity_kernel;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) continue;
      gate_w[i][j] = init.xavier({cv, in, k, k}, in * k * k, cv * k * k);
      gate_b[i][j] = init.zeros({cv});
    }
  fuse_w = init.he({config.out_channels, cv, 3, 3, 3}, cv * 27);
  fuse_b = init.zeros({config.out_channels});
}

AffinityStack Hcam::exchange(const std::array<LevelSplit, 3>& levels,
                             const HcamOptions& options) const {
  AffinityStack stack;
  std::array<Tensor, 3> contexts;
  for (std::size_t j = 0; j < 3; ++j) contexts[j] = linguistic_context(levels[j].words);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) continue;
      if (options.forced_gate) {
        stack.gates[i][j] = Tensor::full(levels[i].visual.shape(), *options.forced_gate);
      } else {
        stack.gates[i][j] =
            affinity(levels[i].visual, contexts[j], gate_w[i][j], gate_b[i][j]);
      }
    }
  return stack;
}

Tensor Hcam::forward(const std::array<LevelSplit, 3>& levels,
                     const HcamOptions& options, AffinityStack* gates_out,
                     std::array<Tensor, 3>* aggregated_out) const {
  AffinityStack gates = exchange(levels, options);
  std::array<Tensor, 3> visual{levels[0].visual, levels[1].visual,
                               levels[2].visual};
  std::array<Tensor, 3> aggregated = aggregate_levels(visual, gates);
  if (gates_out) *gates_out = gates;
  if (aggregated_out) *aggregated_out = aggregated;
  return fuse_depth(aggregated, fuse_w, fuse_b);
}

void Hcam::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) continue;
      const std::string tag =
          prefix + "gate" + kLevelNames[i] + kLevelNames[j];
      out.push_back({tag + ".w", gate_w[i][j], ParamRole::kWeight});
      out.push_back({tag + ".b", gate_b[i][j], ParamRole::kNoDecay});
    }
  out.push_back({prefix + "fuse.w", fuse_w, ParamRole::kWeight});
  out.push_back({prefix + "fuse.b", fuse_b, ParamRole::kNoDecay});
}

}  // namespace shnet
