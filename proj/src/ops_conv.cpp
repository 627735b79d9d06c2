#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "ops_internal.hpp"
#include "shnet/ops.hpp"

namespace shnet::ops {

using detail::TensorImpl;
using internal::RowMatrix;

namespace {

std::size_t output_extent(const char* op, std::size_t in, std::size_t kernel,
                          std::size_t stride, std::size_t pad,
                          std::size_t dilation) {
  const long span = static_cast<long>(dilation) * (static_cast<long>(kernel) - 1) + 1;
  const long room = static_cast<long>(in + 2 * pad) - span;
  if (stride == 0 || room < 0 || room % static_cast<long>(stride) != 0) {
    throw ShapeError(std::string(op) + ": non-integral output extent for input " +
                     std::to_string(in) + ", kernel " + std::to_string(kernel) +
                     ", stride " + std::to_string(stride) + ", pad " +
                     std::to_string(pad) + ", dilation " +
                     std::to_string(dilation));
  }
  return static_cast<std::size_t>(room / static_cast<long>(stride)) + 1;
}

// Shared tail of conv2d/conv3d: out = W * cols + bias, with the matching
// backward that scatters column gradients back through `col2im`.
template <typename Col2Im>
Tensor conv_from_columns(const char* kind, const Tensor& x, const Tensor& w,
                         const Tensor& bias, Shape out_shape, RowMatrix cols,
                         Col2Im col2im) {
  const std::size_t cout = w.dim(0);
  const auto patch = cols.rows(), positions = cols.cols();
  RowMatrix result = internal::owned(w.data().data(), cout, patch) * cols;
  if (bias.defined()) {
    const auto b = bias.data();
    for (std::size_t co = 0; co < cout; ++co) result.row(co).array() += b[co];
  }
  std::vector<double> out(result.data(), result.data() + result.size());
  TensorImpl* px = x.impl().get();
  TensorImpl* pw = w.impl().get();
  TensorImpl* pb = bias.defined() ? bias.impl().get() : nullptr;
  std::vector<Tensor> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(
      std::move(out_shape), std::move(out), kind, inputs,
      [px, pw, pb, cout, patch, positions, cols = std::move(cols),
       col2im](const TensorImpl& o) {
        const RowMatrix g = internal::owned(o.grad.data(), cout, positions);
        if (pw->requires_grad) {
          pw->ensure_grad();
          internal::accumulate(g * cols.transpose(), pw->grad.data());
        }
        if (pb && pb->requires_grad) {
          pb->ensure_grad();
          for (std::size_t co = 0; co < cout; ++co) {
            const double* row = o.grad.data() + co * positions;
            double total = 0.0;
            for (Eigen::Index p = 0; p < positions; ++p) total += row[p];
            pb->grad[co] += total;
          }
        }
        if (px->requires_grad) {
          px->ensure_grad();
          const RowMatrix dcols =
              internal::owned(pw->data.data(), cout, patch).transpose() * g;
          col2im(dcols.data(), px->grad.data());
        }
      });
}

// Geometry of a (possibly depth-1) 3-D convolution; conv2d uses d = 1.
struct ConvGeometry {
  std::size_t cin, d, h, w;
  std::size_t kd, kh, kw;
  std::size_t od, oh, ow;
  std::array<std::size_t, 3> stride, pad, dilation;

  std::size_t positions() const { return od * oh * ow; }
  std::size_t patch() const { return cin * kd * kh * kw; }
};

// Visits every (column row, output row segment) pair with the valid output
// x-range and matching input offset. fn(col_offset, in_offset, count, step)
// covers `count` columns starting at col_offset, reading the input with
// stride `step` from in_offset.
template <typename Fn>
void for_each_segment(const ConvGeometry& g, Fn fn) {
  const long sx = static_cast<long>(g.stride[2]);
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t a = 0; a < g.kd; ++a)
      for (std::size_t b = 0; b < g.kh; ++b)
        for (std::size_t c = 0; c < g.kw; ++c) {
          const std::size_t row = ((ci * g.kd + a) * g.kh + b) * g.kw + c;
          const long off_x = static_cast<long>(c * g.dilation[2]) -
                             static_cast<long>(g.pad[2]);
          // Output columns x with 0 <= x * sx + off_x < w.
          long x_lo = off_x >= 0 ? 0 : (-off_x + sx - 1) / sx;
          long x_hi = (static_cast<long>(g.w) - 1 - off_x);
          x_hi = x_hi < 0 ? -1 : std::min(x_hi / sx, static_cast<long>(g.ow) - 1);
          if (x_lo > x_hi) continue;
          for (std::size_t z = 0; z < g.od; ++z) {
            const long iz = static_cast<long>(z * g.stride[0] + a * g.dilation[0]) -
                            static_cast<long>(g.pad[0]);
            if (iz < 0 || iz >= static_cast<long>(g.d)) continue;
            for (std::size_t y = 0; y < g.oh; ++y) {
              const long iy =
                  static_cast<long>(y * g.stride[1] + b * g.dilation[1]) -
                  static_cast<long>(g.pad[1]);
              if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
              const std::size_t col =
                  row * g.positions() + (z * g.oh + y) * g.ow +
                  static_cast<std::size_t>(x_lo);
              const std::size_t in =
                  ((ci * g.d + static_cast<std::size_t>(iz)) * g.h +
                   static_cast<std::size_t>(iy)) *
                      g.w +
                  static_cast<std::size_t>(x_lo * sx + off_x);
              fn(col, in, static_cast<std::size_t>(x_hi - x_lo + 1),
                 static_cast<std::size_t>(sx));
            }
          }
        }
}

RowMatrix im2col(const ConvGeometry& g, const double* x) {
  RowMatrix cols = RowMatrix::Zero(g.patch(), g.positions());
  for_each_segment(g, [&](std::size_t col, std::size_t in, std::size_t n,
                          std::size_t step) {
    double* dst = cols.data() + col;
    const double* src = x + in;
    for (std::size_t i = 0; i < n; ++i) dst[i] = src[i * step];
  });
  return cols;
}

void col2im(const ConvGeometry& g, const double* cols, double* dx) {
  for_each_segment(g, [&](std::size_t col, std::size_t in, std::size_t n,
                          std::size_t step) {
    const double* src = cols + col;
    double* dst = dx + in;
    for (std::size_t i = 0; i < n; ++i) dst[i * step] += src[i];
  });
}

void check_bias(const char* op, const Tensor& bias, std::size_t cout) {
  if (bias.defined() && bias.shape() != Shape{cout}) {
    throw ShapeError(std::string(op) + ": bias " + shape_str(bias.shape()) +
                     " for " + std::to_string(cout) + " output channels");
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              Conv2dOptions opt) {
  if (x.rank() != 3 || w.rank() != 4 || w.dim(1) != x.dim(0)) {
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " vs weight " +
                     shape_str(w.shape()));
  }
  check_bias("conv2d", bias, w.dim(0));
  const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t oh =
      output_extent("conv2d", h, kh, opt.stride, opt.pad, opt.dilation);
  const std::size_t ow =
      output_extent("conv2d", wd, kw, opt.stride, opt.pad, opt.dilation);

  const ConvGeometry g{cin, 1, h, wd, 1, kh, kw, 1, oh, ow,
                       {1, opt.stride, opt.stride},
                       {0, opt.pad, opt.pad},
                       {1, opt.dilation, opt.dilation}};
  RowMatrix cols = im2col(g, x.data().data());
  auto scatter = [g](const double* dcols, double* dx) { col2im(g, dcols, dx); };
  return conv_from_columns("conv2d", x, w, bias, {cout, oh, ow},
                           std::move(cols), std::move(scatter));
}

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias,
              Conv3dOptions opt) {
  if (x.rank() != 4 || w.rank() != 5 || w.dim(1) != x.dim(0)) {
    throw ShapeError("conv3d: input " + shape_str(x.shape()) + " vs weight " +
                     shape_str(w.shape()));
  }
  check_bias("conv3d", bias, w.dim(0));
  const std::size_t cin = x.dim(0), dp = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0), kd = w.dim(2), kh = w.dim(3), kw = w.dim(4);
  const std::size_t od = output_extent("conv3d", dp, kd, opt.stride_d, opt.pad_d, 1);
  const std::size_t oh = output_extent("conv3d", h, kh, opt.stride_h, opt.pad_h, 1);
  const std::size_t ow = output_extent("conv3d", wd, kw, opt.stride_w, opt.pad_w, 1);

  const ConvGeometry g{cin, dp, h, wd, kd, kh, kw, od, oh, ow,
                       {opt.stride_d, opt.stride_h, opt.stride_w},
                       {opt.pad_d, opt.pad_h, opt.pad_w},
                       {1, 1, 1}};
  RowMatrix cols = im2col(g, x.data().data());
  auto scatter = [g](const double* dcols, double* dx) { col2im(g, dcols, dx); };
  return conv_from_columns("conv3d", x, w, bias, {cout, od, oh, ow},
                           std::move(cols), std::move(scatter));
}

Tensor max_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  if (x.rank() != 3) {
    throw ShapeError("max_pool2d: expected [C x H x W], got " +
                     shape_str(x.shape()));
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = output_extent("max_pool2d", h, kernel, stride, 0, 1);
  const std::size_t ow = output_extent("max_pool2d", w, kernel, stride, 0, 1);
  const auto d = x.data();
  std::vector<double> out(c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xo = 0; xo < ow; ++xo) {
        std::size_t best = (ch * h + y * stride) * w + xo * stride;
        for (std::size_t a = 0; a < kernel; ++a)
          for (std::size_t b = 0; b < kernel; ++b) {
            const std::size_t i = (ch * h + y * stride + a) * w + xo * stride + b;
            if (d[i] > d[best]) best = i;
          }
        const std::size_t o = (ch * oh + y) * ow + xo;
        out[o] = d[best];
        argmax[o] = best;
      }
  TensorImpl* px = x.impl().get();
  return make_result({c, oh, ow}, std::move(out), "max_pool2d", {x},
                     [px, argmax = std::move(argmax)](const TensorImpl& o) {
                       px->ensure_grad();
                       for (std::size_t i = 0; i < argmax.size(); ++i)
                         px->grad[argmax[i]] += o.grad[i];
                     });
}

Tensor avg_pool2d(const Tensor& x, std::size_t kernel, std::size_t stride) {
  if (x.rank() != 3) {
    throw ShapeError("avg_pool2d: expected [C x H x W], got " +
                     shape_str(x.shape()));
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = output_extent("avg_pool2d", h, kernel, stride, 0, 1);
  const std::size_t ow = output_extent("avg_pool2d", w, kernel, stride, 0, 1);
  const double inv = 1.0 / static_cast<double>(kernel * kernel);
  const auto d = x.data();
  std::vector<double> out(c * oh * ow, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xo = 0; xo < ow; ++xo) {
        double acc = 0.0;
        for (std::size_t a = 0; a < kernel; ++a)
          for (std::size_t b = 0; b < kernel; ++b)
            acc += d[(ch * h + y * stride + a) * w + xo * stride + b];
        out[(ch * oh + y) * ow + xo] = acc * inv;
      }
  TensorImpl* px = x.impl().get();
  return make_result(
      {c, oh, ow}, std::move(out), "avg_pool2d", {x},
      [px, c, h, w, oh, ow, kernel, stride, inv](const TensorImpl& o) {
        px->ensure_grad();
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xo = 0; xo < ow; ++xo) {
              const double g = o.grad[(ch * oh + y) * ow + xo] * inv;
              for (std::size_t a = 0; a < kernel; ++a)
                for (std::size_t b = 0; b < kernel; ++b)
                  px->grad[(ch * h + y * stride + a) * w + xo * stride + b] += g;
            }
      });
}

namespace {

struct Bin {
  std::size_t begin;
  std::size_t end;
};

std::vector<Bin> adaptive_bins(std::size_t in, std::size_t out) {
  std::vector<Bin> bins(out);
  for (std::size_t i = 0; i < out; ++i) {
    bins[i].begin = (i * in) / out;
    bins[i].end = ((i + 1) * in + out - 1) / out;
  }
  return bins;
}

}  // namespace

Tensor adaptive_avg_pool2d(const Tensor& x, std::size_t out_h,
                           std::size_t out_w) {
  if (x.rank() != 3 || out_h == 0 || out_w == 0) {
    throw ShapeError("adaptive_avg_pool2d: input " + shape_str(x.shape()) +
                     " to " + std::to_string(out_h) + "x" +
                     std::to_string(out_w));
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto rows = adaptive_bins(h, out_h);
  auto cols = adaptive_bins(w, out_w);
  const auto d = x.data();
  std::vector<double> out(c * out_h * out_w);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t xo = 0; xo < out_w; ++xo) {
        double acc = 0.0;
        for (std::size_t iy = rows[y].begin; iy < rows[y].end; ++iy)
          for (std::size_t ix = cols[xo].begin; ix < cols[xo].end; ++ix)
            acc += d[(ch * h + iy) * w + ix];
        const double count = static_cast<double>(
            (rows[y].end - rows[y].begin) * (cols[xo].end - cols[xo].begin));
        out[(ch * out_h + y) * out_w + xo] = acc / count;
      }
  TensorImpl* px = x.impl().get();
  return make_result(
      {c, out_h, out_w}, std::move(out), "adaptive_avg_pool2d", {x},
      [px, c, h, w, out_h, out_w, rows, cols](const TensorImpl& o) {
        px->ensure_grad();
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t y = 0; y < out_h; ++y)
            for (std::size_t xo = 0; xo < out_w; ++xo) {
              const double count = static_cast<double>(
                  (rows[y].end - rows[y].begin) *
                  (cols[xo].end - cols[xo].begin));
              const double g = o.grad[(ch * out_h + y) * out_w + xo] / count;
              for (std::size_t iy = rows[y].begin; iy < rows[y].end; ++iy)
                for (std::size_t ix = cols[xo].begin; ix < cols[xo].end; ++ix)
                  px->grad[(ch * h + iy) * w + ix] += g;
            }
      });
}

namespace {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double w_lo;
  double w_hi;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    std::size_t lo = static_cast<std::size_t>(src);
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    const double frac = src - static_cast<double>(lo);
    taps[i] = {lo, hi, 1.0 - frac, frac};
  }
  return taps;
}

}  // namespace

Tensor bilinear_upsample(const Tensor& x, std::size_t out_h,
                         std::size_t out_w) {
  if (x.rank() != 3 || out_h == 0 || out_w == 0) {
    throw ShapeError("bilinear_upsample: input " + shape_str(x.shape()) +
                     " to " + std::to_string(out_h) + "x" +
                     std::to_string(out_w));
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  auto ty = bilinear_taps(h, out_h);
  auto tx = bilinear_taps(w, out_w);
  const auto d = x.data();
  std::vector<double> out(c * out_h * out_w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = d.data() + ch * h * w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const Tap& a = ty[y];
      for (std::size_t xo = 0; xo < out_w; ++xo) {
        const Tap& b = tx[xo];
        out[(ch * out_h + y) * out_w + xo] =
            a.w_lo * (b.w_lo * plane[a.lo * w + b.lo] +
                      b.w_hi * plane[a.lo * w + b.hi]) +
            a.w_hi * (b.w_lo * plane[a.hi * w + b.lo] +
                      b.w_hi * plane[a.hi * w + b.hi]);
      }
    }
  }
  TensorImpl* px = x.impl().get();
  return make_result(
      {c, out_h, out_w}, std::move(out), "bilinear_upsample", {x},
      [px, c, h, w, out_h, out_w, ty, tx](const TensorImpl& o) {
        px->ensure_grad();
        for (std::size_t ch = 0; ch < c; ++ch) {
          double* plane = px->grad.data() + ch * h * w;
          for (std::size_t y = 0; y < out_h; ++y) {
            const Tap& a = ty[y];
            for (std::size_t xo = 0; xo < out_w; ++xo) {
              const Tap& b = tx[xo];
              const double g = o.grad[(ch * out_h + y) * out_w + xo];
              plane[a.lo * w + b.lo] += g * a.w_lo * b.w_lo;
              plane[a.lo * w + b.hi] += g * a.w_lo * b.w_hi;
              plane[a.hi * w + b.lo] += g * a.w_hi * b.w_lo;
              plane[a.hi * w + b.hi] += g * a.w_hi * b.w_hi;
            }
          }
        }
      });
}

}  // namespace shnet::ops
