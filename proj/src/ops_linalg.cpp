#include <algorithm>
#include <cmath>

#include "ops_internal.hpp"
#include "shnet/ops.hpp"

namespace shnet::ops {

using detail::TensorImpl;
using internal::RowMatrix;

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: dimension mismatch " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  internal::store(internal::owned(a.data().data(), m, k) *
                      internal::owned(b.data().data(), k, n),
                  out.data());
  TensorImpl* pa = a.impl().get();
  TensorImpl* pb = b.impl().get();
  return make_result({m, n}, std::move(out), "matmul", {a, b},
                     [pa, pb, m, k, n](const TensorImpl& o) {
                       const RowMatrix g = internal::owned(o.grad.data(), m, n);
                       if (pa->requires_grad) {
                         pa->ensure_grad();
                         internal::accumulate(
                             g * internal::owned(pb->data.data(), k, n).transpose(),
                             pa->grad.data());
                       }
                       if (pb->requires_grad) {
                         pb->ensure_grad();
                         internal::accumulate(
                             internal::owned(pa->data.data(), m, k).transpose() * g,
                             pb->grad.data());
                       }
                     });
}

Tensor softmax(const Tensor& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  const auto d = x.data();
  std::vector<double> out(d.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = d.data() + r * n;
    double* dst = out.data() + r * n;
    const double peak = *std::max_element(src, src + n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dst[i] = std::exp(src[i] - peak);
      total += dst[i];
    }
    const double inv = 1.0 / total;
    for (std::size_t i = 0; i < n; ++i) dst[i] *= inv;
  }
  TensorImpl* px = x.impl().get();
  return make_result(x.shape(), std::move(out), "softmax", {x},
                     [px, rows, n](const TensorImpl& o) {
                       px->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* y = o.data.data() + r * n;
                         const double* g = o.grad.data() + r * n;
                         double dot = 0.0;
                         for (std::size_t i = 0; i < n; ++i) dot += y[i] * g[i];
                         double* dx = px->grad.data() + r * n;
                         for (std::size_t i = 0; i < n; ++i)
                           dx[i] += y[i] * (g[i] - dot);
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  if (x.rank() != 2) {
    throw ShapeError("layer_norm: expected [C x S], got " +
                     shape_str(x.shape()));
  }
  const std::size_t c = x.dim(0), s = x.dim(1);
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw ShapeError("layer_norm: affine params " + shape_str(gamma.shape()) +
                     "/" + shape_str(beta.shape()) + " do not match " +
                     shape_str(x.shape()));
  }
  const auto d = x.data();
  const auto gm = gamma.data();
  const auto bt = beta.data();
  std::vector<double> xhat(d.size());
  std::vector<double> rstd(s);
  std::vector<double> out(d.size());
  for (std::size_t col = 0; col < s; ++col) {
    double m = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) m += d[ch * s + col];
    m /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double dev = d[ch * s + col] - m;
      var += dev * dev;
    }
    var /= static_cast<double>(c);
    const double r = 1.0 / std::sqrt(var + eps);
    rstd[col] = r;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t i = ch * s + col;
      xhat[i] = (d[i] - m) * r;
      out[i] = gm[ch] * xhat[i] + bt[ch];
    }
  }
  TensorImpl* px = x.impl().get();
  TensorImpl* pg = gamma.impl().get();
  TensorImpl* pb = beta.impl().get();
  return make_result(
      x.shape(), std::move(out), "layer_norm", {x, gamma, beta},
      [px, pg, pb, c, s, xhat = std::move(xhat),
       rstd = std::move(rstd)](const TensorImpl& o) {
        const auto& g = o.grad;
        if (pg->requires_grad) {
          pg->ensure_grad();
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t col = 0; col < s; ++col)
              pg->grad[ch] += g[ch * s + col] * xhat[ch * s + col];
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t col = 0; col < s; ++col)
              pb->grad[ch] += g[ch * s + col];
        }
        if (!px->requires_grad) return;
        px->ensure_grad();
        const double inv_c = 1.0 / static_cast<double>(c);
        for (std::size_t col = 0; col < s; ++col) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i = ch * s + col;
            const double dxhat = g[i] * pg->data[ch];
            mean_d += dxhat;
            mean_dx += dxhat * xhat[i];
          }
          mean_d *= inv_c;
          mean_dx *= inv_c;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i = ch * s + col;
            const double dxhat = g[i] * pg->data[ch];
            px->grad[i] += rstd[col] * (dxhat - mean_d - xhat[i] * mean_dx);
          }
        }
      });
}

Tensor bce_loss(const Tensor& probs, const Tensor& target) {
  if (probs.shape() != target.shape()) {
    throw ShapeError("bce_loss: prediction " + shape_str(probs.shape()) +
                     " vs target " + shape_str(target.shape()));
  }
  const auto p = probs.data();
  const auto y = target.data();
  const double n = static_cast<double>(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double s = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    total -= y[i] * std::log(s) + (1.0 - y[i]) * std::log(1.0 - s);
  }
  TensorImpl* pp = probs.impl().get();
  TensorImpl* py = target.impl().get();
  return make_result(
      {1}, {total / n}, "bce_loss", {probs, target},
      [pp, py, n](const TensorImpl& o) {
        const double g = o.grad[0] / n;
        if (pp->requires_grad) {
          pp->ensure_grad();
          for (std::size_t i = 0; i < pp->data.size(); ++i) {
            const double s = pp->data[i];
            if (s < kBceClamp || s > 1.0 - kBceClamp) continue;
            pp->grad[i] += g * (s - py->data[i]) / (s * (1.0 - s));
          }
        }
        if (py->requires_grad) {
          py->ensure_grad();
          for (std::size_t i = 0; i < py->data.size(); ++i) {
            const double s =
                std::clamp(pp->data[i], kBceClamp, 1.0 - kBceClamp);
            py->grad[i] -= g * (std::log(s) - std::log(1.0 - s));
          }
        }
      });
}

}  // namespace shnet::ops
