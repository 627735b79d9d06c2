#pragma once

#include <array>
#include <optional>
#include <string>

#include "shnet/params.hpp"
#include "shnet/tensor.hpp"

namespace shnet {

/// One level's SFM output split back into its two modalities.
struct LevelSplit {
  Tensor visual;  // f^v: [Cv x H x W]
  Tensor words;   // f^l: [Cl x T]
};

/// gates[i][j] for i != j routes level j's linguistic context onto level i's
/// visual map. Diagonal entries are undefined.
struct AffinityStack {
  std::array<std::array<Tensor, 3>, 3> gates;
};

struct HcamConfig {
  std::size_t visual_channels = 64;
  std::size_t context_channels = 64;
  std::size_t out_channels = 64;
  std::size_t affinity_kernel = 1;
};

struct HcamOptions {
  /// Test hook: replace every affinity map with this constant.
  std::optional<double> forced_gate;
};

/// Length-wise mean of f^l, [Cl].
Tensor linguistic_context(const Tensor& words);

/// sigmoid(conv([f_i^v ; tile(ctx_j)])) with the context broadcast to every
/// position and concatenated on the channel axis.
Tensor affinity(const Tensor& visual, const Tensor& context, const Tensor& w,
                const Tensor& b);

/// g_i = f_i^v + sum_{j != i} gate_ij * f_j^v, for the three levels.
std::array<Tensor, 3> aggregate_levels(const std::array<Tensor, 3>& visual,
                                       const AffinityStack& gates);

/// Stacks maps shallow to deep along a new depth axis: [C x 3 x H x W].
Tensor stack_levels(const std::array<Tensor, 3>& maps);

/// Depth-3 valid, spatially same-padded 3x3x3 convolution collapsing the
/// stacked levels to [Cout x H x W].
Tensor fuse_depth(const std::array<Tensor, 3>& maps, const Tensor& w,
                  const Tensor& b);

class Hcam {
 public:
  Hcam(const HcamConfig& config, Initializer& init);

  /// Six ordered-pair affinity maps, each with its own conv.
  AffinityStack exchange(const std::array<LevelSplit, 3>& levels,
                         const HcamOptions& options = {}) const;
  /// Final multi-modal context G, [Cout x H x W].
  Tensor forward(const std::array<LevelSplit, 3>& levels,
                 const HcamOptions& options = {},
                 AffinityStack* gates_out = nullptr,
                 std::array<Tensor, 3>* aggregated_out = nullptr) const;

  void collect(ParamList& out, const std::string& prefix) const;
  const HcamConfig& config() const { return config_; }

  std::array<std::array<Tensor, 3>, 3> gate_w;
  std::array<std::array<Tensor, 3>, 3> gate_b;
  Tensor fuse_w;  // [Cout x Cv x 3 x 3 x 3]
  Tensor fuse_b;

 private:
  HcamConfig config_;
};

}  // namespace shnet
