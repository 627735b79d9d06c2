#include "shnet/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace shnet {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor rank must be at least 1");
  for (auto extent : shape) {
    if (extent == 0) {
      throw ShapeError("tensor extents must be positive, got " +
                       shape_str(shape));
    }
  }
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  validate_shape(shape);
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->data.assign(shape_numel(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  validate_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

detail::TensorImpl& Tensor::checked() const {
  if (!impl_) throw UsageError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return checked().data.size(); }

std::span<const double> Tensor::data() const { return checked().data; }

std::span<double> Tensor::mutable_data() { return checked().data; }

double Tensor::item() const {
  const auto& d = checked().data;
  if (d.size() != 1) {
    throw UsageError("item() on tensor of shape " + shape_str(shape()));
  }
  return d[0];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

void Tensor::set_requires_grad(bool value) { checked().requires_grad = value; }

bool Tensor::has_grad() const {
  return checked().grad.size() == checked().data.size();
}

std::span<const double> Tensor::grad() const {
  checked().ensure_grad();
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() {
  checked().ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() {
  auto& impl = checked();
  if (!impl.grad.empty()) std::fill(impl.grad.begin(), impl.grad.end(), 0.0);
}

bool Tensor::has_node() const { return checked().node != nullptr; }

std::string_view Tensor::op_kind() const {
  return has_node() ? impl_->node->kind : std::string_view("leaf");
}

Tensor Tensor::clone() const {
  const auto& src = checked();
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = src.shape;
  impl->data = src.data;
  return Tensor(std::move(impl));
}

Tensor make_result(Shape shape, std::vector<double> values,
                   std::string_view kind, const std::vector<Tensor>& inputs,
                   detail::BackwardFn backward) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  if (g_grad_enabled) {
    bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
      return t.defined() && t.requires_grad();
    });
    if (any) {
      auto node = std::make_shared<detail::Node>();
      node->kind = kind;
      node->inputs.reserve(inputs.size());
      for (const auto& t : inputs) {
        if (t.defined()) node->inputs.push_back(t.impl());
      }
      node->backward = std::move(backward);
      impl->node = std::move(node);
      impl->requires_grad = true;
    }
  }
  return Tensor(std::move(impl));
}

Tensor make_result(Shape shape, std::vector<double> values,
                   std::string_view kind, std::initializer_list<Tensor> inputs,
                   detail::BackwardFn backward) {
  return make_result(std::move(shape), std::move(values), kind,
                     std::vector<Tensor>(inputs), std::move(backward));
}

std::vector<const detail::TensorImpl*> topological_order(const Tensor& root) {
  std::vector<const detail::TensorImpl*> order;
  if (!root.defined() || !root.has_node()) return order;
  std::unordered_set<const detail::TensorImpl*> visited;
  // Iterative post-order DFS; inputs are expanded in their recorded order.
  struct Frame {
    const detail::TensorImpl* impl;
    std::size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({root.impl().get(), 0});
  visited.insert(root.impl().get());
  while (!stack.empty()) {
    auto& top = stack.back();
    const auto& inputs = top.impl->node->inputs;
    if (top.next_input < inputs.size()) {
      const detail::TensorImpl* child = inputs[top.next_input++].get();
      if (child->node && visited.insert(child).second) {
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(top.impl);
      stack.pop_back();
    }
  }
  return order;
}

void backward(const Tensor& loss, const BackwardOptions& options) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " +
                     (loss.defined() ? shape_str(loss.shape())
                                     : std::string("<undefined>")));
  }
  auto* root = loss.impl().get();
  if (!root->requires_grad) {
    throw UsageError("backward() on a tensor that does not require grad");
  }
  root->ensure_grad();
  root->grad[0] += options.seed;
  if (!root->node) return;

  auto order = topological_order(loss);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto* impl = const_cast<detail::TensorImpl*>(*it);
    if (impl->grad.size() != impl->data.size()) continue;
    if (options.on_visit) options.on_visit(impl->node->kind);
    impl->node->backward(*impl);
  }
}

}  // namespace shnet
