#pragma once

#include <cstddef>
#include <vector>

#include "shnet/tensor.hpp"

// Differentiable primitives. Every function records a graph node when grad
// mode is on and an input requires grad.
namespace shnet::ops {

// Elementwise binary ops broadcast only when each axis pair is equal or one
// side is 1. Ranks must match.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

/// Sum of all elements, shape [1].
Tensor sum(const Tensor& x);
/// Mean of all elements, shape [1].
Tensor mean_all(const Tensor& x);
/// Mean along one axis; the axis is kept with extent 1.
Tensor mean(const Tensor& x, std::size_t axis);

Tensor reshape(const Tensor& x, Shape shape);
/// 2-D transpose.
Tensor transpose(const Tensor& x);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t length);
/// Repeats singleton axes up to `shape`.
Tensor expand(const Tensor& x, const Shape& shape);
/// Rows of a 2-D table, shape [indices.size() x cols].
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& rows);

Tensor matmul(const Tensor& a, const Tensor& b);
/// Softmax over the last axis with max subtraction.
Tensor softmax(const Tensor& x);
/// x: [C x S]; normalizes every column over the C axis.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t dilation = 1;
};

/// x: [Cin x H x W], w: [Cout x Cin x kh x kw], bias: [Cout] or undefined.
/// Cross-correlation with zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              Conv2dOptions options = {});

struct Conv3dOptions {
  std::size_t stride_d = 1, stride_h = 1, stride_w = 1;
  std::size_t pad_d = 0, pad_h = 0, pad_w = 0;
};

/// x: [Cin x D x H x W], w: [Cout x Cin x kd x kh x kw], bias: [Cout] or
/// undefined.
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias,
              Conv3dOptions options = {});

/// x: [C x H x W].
Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride);
Tensor avg_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride);
/// Bin i covers [floor(i*in/out), ceil((i+1)*in/out)).
Tensor adaptive_avg_pool2d(const Tensor& x, std::size_t out_h,
                           std::size_t out_w);
/// Half-pixel (align_corners = false) bilinear resize of [C x H x W].
Tensor bilinear_upsample(const Tensor& x, std::size_t out_h,
                         std::size_t out_w);

/// Mean binary cross-entropy; probabilities are clamped to
/// [1e-7, 1 - 1e-7] before the log.
Tensor bce_loss(const Tensor& probs, const Tensor& target);

inline constexpr double kBceClamp = 1e-7;

}  // namespace shnet::ops
