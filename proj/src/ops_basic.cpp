#include <algorithm>
#include <cmath>
#include <numeric>

#include "ops_internal.hpp"
#include "shnet/ops.hpp"

namespace shnet::ops {

using detail::TensorImpl;

namespace {

struct Broadcast {
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
  bool same = false;
};

std::vector<std::size_t> contiguous_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size());
  std::size_t s = 1;
  for (std::size_t i = shape.size(); i-- > 0;) {
    strides[i] = s;
    s *= shape[i];
  }
  return strides;
}

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": rank mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
  }
  auto sa = contiguous_strides(a);
  auto sb = contiguous_strides(b);
  plan.out.resize(a.size());
  plan.stride_a.resize(a.size());
  plan.stride_b.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i] && a[i] != 1 && b[i] != 1) {
      throw ShapeError(std::string(op) + ": incompatible shapes " +
                       shape_str(a) + " vs " + shape_str(b));
    }
    plan.out[i] = std::max(a[i], b[i]);
    plan.stride_a[i] = a[i] == 1 ? 0 : sa[i];
    plan.stride_b[i] = b[i] == 1 ? 0 : sb[i];
  }
  return plan;
}

// Calls f(out_index, a_index, b_index) over the broadcast output.
template <typename F>
void for_each_broadcast(const Broadcast& plan, F&& f) {
  const std::size_t n = shape_numel(plan.out);
  if (plan.same) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  const std::size_t rank = plan.out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      ia += plan.stride_a[d];
      ib += plan.stride_b[d];
      if (idx[d] < plan.out[d]) break;
      ia -= plan.stride_a[d] * idx[d];
      ib -= plan.stride_b[d] * idx[d];
      idx[d] = 0;
    }
  }
}

template <typename Fwd>
Tensor unary(const Tensor& x, std::string_view kind, Fwd fwd,
             detail::BackwardFn backward) {
  const auto src = x.data();
  std::vector<double> out(src.size());
  std::transform(src.begin(), src.end(), out.begin(), fwd);
  return make_result(x.shape(), std::move(out), kind, {x},
                     std::move(backward));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  auto plan = plan_broadcast(a.shape(), b.shape(), "add");
  const auto da = a.data(), db = b.data();
  std::vector<double> out(shape_numel(plan.out));
  for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    out[i] = da[ia] + db[ib];
  });
  TensorImpl* pa = a.impl().get();
  TensorImpl* pb = b.impl().get();
  return make_result(plan.out, std::move(out), "add", {a, b},
                     [pa, pb, plan](const TensorImpl& o) {
                       const auto& g = o.grad;
                       if (pa->requires_grad) pa->ensure_grad();
                       if (pb->requires_grad) pb->ensure_grad();
                       for_each_broadcast(plan, [&](std::size_t i,
                                                    std::size_t ia,
                                                    std::size_t ib) {
                         if (pa->requires_grad) pa->grad[ia] += g[i];
                         if (pb->requires_grad) pb->grad[ib] += g[i];
                       });
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto plan = plan_broadcast(a.shape(), b.shape(), "sub");
  const auto da = a.data(), db = b.data();
  std::vector<double> out(shape_numel(plan.out));
  for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    out[i] = da[ia] - db[ib];
  });
  TensorImpl* pa = a.impl().get();
  TensorImpl* pb = b.impl().get();
  return make_result(plan.out, std::move(out), "sub", {a, b},
                     [pa, pb, plan](const TensorImpl& o) {
                       const auto& g = o.grad;
                       if (pa->requires_grad) pa->ensure_grad();
                       if (pb->requires_grad) pb->ensure_grad();
                       for_each_broadcast(plan, [&](std::size_t i,
                                                    std::size_t ia,
                                                    std::size_t ib) {
                         if (pa->requires_grad) pa->grad[ia] += g[i];
                         if (pb->requires_grad) pb->grad[ib] -= g[i];
                       });
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto plan = plan_broadcast(a.shape(), b.shape(), "mul");
  const auto da = a.data(), db = b.data();
  std::vector<double> out(shape_numel(plan.out));
  for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
    out[i] = da[ia] * db[ib];
  });
  TensorImpl* pa = a.impl().get();
  TensorImpl* pb = b.impl().get();
  return make_result(plan.out, std::move(out), "mul", {a, b},
                     [pa, pb, plan](const TensorImpl& o) {
                       const auto& g = o.grad;
                       if (pa->requires_grad) pa->ensure_grad();
                       if (pb->requires_grad) pb->ensure_grad();
                       for_each_broadcast(plan, [&](std::size_t i,
                                                    std::size_t ia,
                                                    std::size_t ib) {
                         if (pa->requires_grad)
                           pa->grad[ia] += g[i] * pb->data[ib];
                         if (pb->requires_grad)
                           pb->grad[ib] += g[i] * pa->data[ia];
                       });
                     });
}

Tensor scale(const Tensor& x, double factor) {
  TensorImpl* px = x.impl().get();
  return unary(
      x, "scale", [factor](double v) { return v * factor; },
      [px, factor](const TensorImpl& o) {
        px->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i)
          px->grad[i] += factor * o.grad[i];
      });
}

Tensor add_scalar(const Tensor& x, double value) {
  TensorImpl* px = x.impl().get();
  return unary(
      x, "add_scalar", [value](double v) { return v + value; },
      [px](const TensorImpl& o) {
        px->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i)
          px->grad[i] += o.grad[i];
      });
}

Tensor sigmoid(const Tensor& x) {
  TensorImpl* px = x.impl().get();
  return unary(
      x, "sigmoid",
      [](double v) {
        // Split by sign so exp never overflows.
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [px](const TensorImpl& o) {
        px->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
          const double y = o.data[i];
          px->grad[i] += o.grad[i] * y * (1.0 - y);
        }
      });
}

Tensor tanh(const Tensor& x) {
  TensorImpl* px = x.impl().get();
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [px](const TensorImpl& o) {
        px->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
          const double y = o.data[i];
          px->grad[i] += o.grad[i] * (1.0 - y * y);
        }
      });
}

Tensor relu(const Tensor& x) {
  TensorImpl* px = x.impl().get();
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [px](const TensorImpl& o) {
        px->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
          if (px->data[i] > 0.0) px->grad[i] += o.grad[i];
        }
      });
}

Tensor sum(const Tensor& x) {
  const auto d = x.data();
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  TensorImpl* px = x.impl().get();
  return make_result({1}, {total}, "sum", {x}, [px](const TensorImpl& o) {
    px->ensure_grad();
    const double g = o.grad[0];
    for (auto& v : px->grad) v += g;
  });
}

Tensor mean_all(const Tensor& x) { return scale(sum(x), 1.0 / x.numel()); }

Tensor mean(const Tensor& x, std::size_t axis) {
  const auto& shape = x.shape();
  if (axis >= shape.size()) {
    throw ShapeError("mean: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];
  Shape out_shape = shape;
  out_shape[axis] = 1;
  const auto d = x.data();
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < inner; ++i)
        out[o * inner + i] += d[(o * n + k) * inner + i];
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= inv;
  TensorImpl* px = x.impl().get();
  return make_result(std::move(out_shape), std::move(out), "mean", {x},
                     [px, outer, inner, n, inv](const TensorImpl& o) {
                       px->ensure_grad();
                       for (std::size_t a = 0; a < outer; ++a)
                         for (std::size_t k = 0; k < n; ++k)
                           for (std::size_t i = 0; i < inner; ++i)
                             px->grad[(a * n + k) * inner + i] +=
                                 o.grad[a * inner + i] * inv;
                     });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  }
  for (auto e : shape)
    if (e == 0) throw ShapeError("reshape: zero extent in " + shape_str(shape));
  auto values = std::vector<double>(x.data().begin(), x.data().end());
  TensorImpl* px = x.impl().get();
  return make_result(std::move(shape), std::move(values), "reshape", {x},
                     [px](const TensorImpl& o) {
                       px->ensure_grad();
                       for (std::size_t i = 0; i < o.grad.size(); ++i)
                         px->grad[i] += o.grad[i];
                     });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) {
    throw ShapeError("transpose: expected a matrix, got " +
                     shape_str(x.shape()));
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const auto d = x.data();
  std::vector<double> out(d.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = d[r * cols + c];
  TensorImpl* px = x.impl().get();
  return make_result({cols, rows}, std::move(out), "transpose", {x},
                     [px, rows, cols](const TensorImpl& o) {
                       px->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c)
                           px->grad[r * cols + c] += o.grad[c * rows + r];
                     });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) +
                     " out of range for " + shape_str(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      if (i != axis && s[i] != first[i]) ok = false;
    if (!ok) {
      throw ShapeError("concat: " + shape_str(first) + " vs " + shape_str(s) +
                       " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  const std::size_t total = out_shape[axis];

  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> lengths;
  std::vector<TensorImpl*> impls;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.dim(axis);
    const auto d = p.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(d.begin() + o * len * inner, len * inner,
                  out.begin() + (o * total + offset) * inner);
    offsets.push_back(offset);
    lengths.push_back(len);
    impls.push_back(p.impl().get());
    offset += len;
  }
  return make_result(
      std::move(out_shape), std::move(out), "concat", parts,
      [impls, offsets, lengths, outer, inner, total](const TensorImpl& o) {
        for (std::size_t k = 0; k < impls.size(); ++k) {
          TensorImpl* p = impls[k];
          if (!p->requires_grad) continue;
          p->ensure_grad();
          const std::size_t len = lengths[k];
          for (std::size_t a = 0; a < outer; ++a) {
            const double* src = o.grad.data() + (a * total + offsets[k]) * inner;
            double* dst = p->grad.data() + a * len * inner;
            for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
          }
        }
      });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t length) {
  const Shape& shape = x.shape();
  if (axis >= shape.size() || length == 0 || start + length > shape[axis]) {
    throw ShapeError("slice: [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") on axis " +
                     std::to_string(axis) + " of " + shape_str(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t n = shape[axis];
  Shape out_shape = shape;
  out_shape[axis] = length;
  const auto d = x.data();
  std::vector<double> out(outer * length * inner);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(d.begin() + (o * n + start) * inner, length * inner,
                out.begin() + o * length * inner);
  TensorImpl* px = x.impl().get();
  return make_result(
      std::move(out_shape), std::move(out), "slice", {x},
      [px, outer, inner, n, start, length](const TensorImpl& o) {
        px->ensure_grad();
        for (std::size_t a = 0; a < outer; ++a) {
          const double* src = o.grad.data() + a * length * inner;
          double* dst = px->grad.data() + (a * n + start) * inner;
          for (std::size_t i = 0; i < length * inner; ++i) dst[i] += src[i];
        }
      });
}

Tensor expand(const Tensor& x, const Shape& shape) {
  const Shape& src = x.shape();
  bool ok = src.size() == shape.size();
  for (std::size_t i = 0; ok && i < src.size(); ++i)
    if (src[i] != shape[i] && src[i] != 1) ok = false;
  if (!ok) {
    throw ShapeError("expand: cannot expand " + shape_str(src) + " to " +
                     shape_str(shape));
  }
  // expand(x) == x + zeros(shape) under singleton broadcasting.
  Broadcast plan = plan_broadcast(src, shape, "expand");
  const auto d = x.data();
  std::vector<double> out(shape_numel(shape));
  for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t) {
    out[i] = d[ia];
  });
  TensorImpl* px = x.impl().get();
  return make_result(shape, std::move(out), "expand", {x},
                     [px, plan](const TensorImpl& o) {
                       px->ensure_grad();
                       for_each_broadcast(plan, [&](std::size_t i,
                                                    std::size_t ia,
                                                    std::size_t) {
                         px->grad[ia] += o.grad[i];
                       });
                     });
}

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& rows) {
  if (table.rank() != 2) {
    throw ShapeError("gather_rows: table must be 2-D, got " +
                     shape_str(table.shape()));
  }
  if (rows.empty()) throw ShapeError("gather_rows: no rows requested");
  const std::size_t n = table.dim(0), cols = table.dim(1);
  const auto d = table.data();
  std::vector<double> out(rows.size() * cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[r]) +
                       " out of range for " + shape_str(table.shape()));
    }
    std::copy_n(d.begin() + rows[r] * cols, cols, out.begin() + r * cols);
  }
  TensorImpl* pt = table.impl().get();
  return make_result({rows.size(), cols}, std::move(out), "gather_rows",
                     {table}, [pt, rows, cols](const TensorImpl& o) {
                       pt->ensure_grad();
                       for (std::size_t r = 0; r < rows.size(); ++r)
                         for (std::size_t c = 0; c < cols; ++c)
                           pt->grad[rows[r] * cols + c] += o.grad[r * cols + c];
                     });
}

}  // namespace shnet::ops
