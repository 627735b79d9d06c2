#pragma once

// Naive reference implementations used by the unit and acceptance tests.
// Plain loops over flat row-major buffers; nothing here calls into shnet::ops.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace oracle {

using Buffer = std::vector<double>;

inline Buffer matmul(const Buffer& a, const Buffer& b, std::size_t n, std::size_t k,
                     std::size_t m) {
  Buffer out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      long double acc = 0.0L;
      for (std::size_t t = 0; t < k; ++t) acc += static_cast<long double>(a[i * k + t]) * b[t * m + j];
      out[i * m + j] = static_cast<double>(acc);
    }
  return out;
}

struct Conv2dSpec {
  std::size_t cin, h, w, cout, kh, kw, stride, pad, dilation;
  std::size_t out_h() const { return (h + 2 * pad - dilation * (kh - 1) - 1) / stride + 1; }
  std::size_t out_w() const { return (w + 2 * pad - dilation * (kw - 1) - 1) / stride + 1; }
};

inline Buffer conv2d(const Buffer& x, const Buffer& wt, const Buffer* bias,
                     const Conv2dSpec& s) {
  const std::size_t oh = s.out_h(), ow = s.out_w();
  Buffer out(s.cout * oh * ow, 0.0);
  for (std::size_t co = 0; co < s.cout; ++co)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xo = 0; xo < ow; ++xo) {
        long double acc = bias ? (*bias)[co] : 0.0;
        for (std::size_t ci = 0; ci < s.cin; ++ci)
          for (std::size_t a = 0; a < s.kh; ++a)
            for (std::size_t b = 0; b < s.kw; ++b) {
              const long iy = static_cast<long>(y * s.stride + a * s.dilation) - static_cast<long>(s.pad);
              const long ix = static_cast<long>(xo * s.stride + b * s.dilation) - static_cast<long>(s.pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(s.h) || ix >= static_cast<long>(s.w)) continue;
              acc += static_cast<long double>(x[(ci * s.h + iy) * s.w + ix]) *
                     wt[((co * s.cin + ci) * s.kh + a) * s.kw + b];
            }
        out[(co * oh + y) * ow + xo] = static_cast<double>(acc);
      }
  return out;
}

struct Conv3dSpec {
  std::size_t cin, d, h, w, cout, kd, kh, kw;
  std::size_t stride_d = 1, stride_h = 1, stride_w = 1;
  std::size_t pad_d = 0, pad_h = 0, pad_w = 0;
  std::size_t out_d() const { return (d + 2 * pad_d - kd) / stride_d + 1; }
  std::size_t out_h() const { return (h + 2 * pad_h - kh) / stride_h + 1; }
  std::size_t out_w() const { return (w + 2 * pad_w - kw) / stride_w + 1; }
};

inline Buffer conv3d(const Buffer& x, const Buffer& wt, const Buffer* bias,
                     const Conv3dSpec& s) {
  const std::size_t od = s.out_d(), oh = s.out_h(), ow = s.out_w();
  Buffer out(s.cout * od * oh * ow, 0.0);
  for (std::size_t co = 0; co < s.cout; ++co)
    for (std::size_t z = 0; z < od; ++z)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xo = 0; xo < ow; ++xo) {
          long double acc = bias ? (*bias)[co] : 0.0;
          for (std::size_t ci = 0; ci < s.cin; ++ci)
            for (std::size_t a = 0; a < s.kd; ++a)
              for (std::size_t b = 0; b < s.kh; ++b)
                for (std::size_t c = 0; c < s.kw; ++c) {
                  const long iz = static_cast<long>(z * s.stride_d + a) - static_cast<long>(s.pad_d);
                  const long iy = static_cast<long>(y * s.stride_h + b) - static_cast<long>(s.pad_h);
                  const long ix = static_cast<long>(xo * s.stride_w + c) - static_cast<long>(s.pad_w);
                  if (iz < 0 || iy < 0 || ix < 0 || iz >= static_cast<long>(s.d) ||
                      iy >= static_cast<long>(s.h) || ix >= static_cast<long>(s.w))
                    continue;
                  acc += static_cast<long double>(x[((ci * s.d + iz) * s.h + iy) * s.w + ix]) *
                         wt[(((co * s.cin + ci) * s.kd + a) * s.kh + b) * s.kw + c];
                }
          out[((co * od + z) * oh + y) * ow + xo] = static_cast<double>(acc);
        }
  return out;
}

/// Row-wise softmax of an [n x m] buffer.
inline Buffer softmax_rows(const Buffer& x, std::size_t n, std::size_t m) {
  Buffer out(x.size());
  for (std::size_t i = 0; i < n; ++i) {
    long double peak = x[i * m];
    for (std::size_t j = 1; j < m; ++j) peak = std::max<long double>(peak, x[i * m + j]);
    long double total = 0.0L;
    for (std::size_t j = 0; j < m; ++j) total += std::exp(static_cast<long double>(x[i * m + j]) - peak);
    for (std::size_t j = 0; j < m; ++j)
      out[i * m + j] = static_cast<double>(std::exp(static_cast<long double>(x[i * m + j]) - peak) / total);
  }
  return out;
}

/// Column-wise layer norm of a [c x s] buffer (biased variance).
inline Buffer layer_norm_columns(const Buffer& x, const Buffer& gamma, const Buffer& beta,
                                 std::size_t c, std::size_t s, double eps) {
  Buffer out(x.size());
  for (std::size_t j = 0; j < s; ++j) {
    long double mean = 0.0L;
    for (std::size_t i = 0; i < c; ++i) mean += x[i * s + j];
    mean /= static_cast<long double>(c);
    long double var = 0.0L;
    for (std::size_t i = 0; i < c; ++i) {
      const long double d = x[i * s + j] - mean;
      var += d * d;
    }
    var /= static_cast<long double>(c);
    const long double inv = 1.0L / std::sqrt(var + eps);
    for (std::size_t i = 0; i < c; ++i)
      out[i * s + j] = static_cast<double>(gamma[i] * (x[i * s + j] - mean) * inv + beta[i]);
  }
  return out;
}

inline double bce(const Buffer& p, const Buffer& y, double clamp) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const long double q = std::min<long double>(std::max<long double>(p[i], clamp), 1.0L - clamp);
    total -= y[i] * std::log(q) + (1.0L - y[i]) * std::log(1.0L - q);
  }
  return static_cast<double>(total / static_cast<long double>(p.size()));
}

/// Multi-head self-attention on x [c x s], projections [c x c] with rows of
/// head h in [h*d, (h+1)*d). Returns [c x s].
inline Buffer attention(const Buffer& x, const Buffer& wq, const Buffer& wk,
                        const Buffer& wv, const Buffer& wo, std::size_t c,
                        std::size_t s, std::size_t heads, bool residual) {
  const Buffer q = matmul(wq, x, c, c, s);
  const Buffer k = matmul(wk, x, c, c, s);
  const Buffer v = matmul(wv, x, c, c, s);
  const std::size_t d = c / heads;
  Buffer concat(c * s, 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    Buffer logits(s * s);
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j) {
        long double acc = 0.0L;
        for (std::size_t t = 0; t < d; ++t)
          acc += static_cast<long double>(q[(h * d + t) * s + i]) * k[(h * d + t) * s + j];
        logits[i * s + j] = static_cast<double>(acc / std::sqrt(static_cast<long double>(d)));
      }
    const Buffer a = softmax_rows(logits, s, s);
    for (std::size_t t = 0; t < d; ++t)
      for (std::size_t i = 0; i < s; ++i) {
        long double acc = 0.0L;
        for (std::size_t j = 0; j < s; ++j) acc += static_cast<long double>(a[i * s + j]) * v[(h * d + t) * s + j];
        concat[(h * d + t) * s + i] = static_cast<double>(acc);
      }
  }
  Buffer out = matmul(wo, concat, c, c, s);
  if (residual)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += x[i];
  return out;
}

struct MaskCounts {
  std::uint64_t intersection = 0;
  std::uint64_t uni = 0;
};

inline MaskCounts count_pixels(const std::vector<int>& pred, const std::vector<int>& gt) {
  MaskCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && gt[i]) ++c.intersection;
    if (pred[i] || gt[i]) ++c.uni;
  }
  return c;
}

inline double max_abs_diff(const Buffer& a, const Buffer& b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
