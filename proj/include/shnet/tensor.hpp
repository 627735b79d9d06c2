#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised when operand extents are incompatible with an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an API is called outside its contract (e.g. backward on a
/// non-scalar).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

struct TensorImpl;

// Receives the op's output; reads out.grad (and out.data where useful).
using BackwardFn = std::function<void(const TensorImpl& out)>;

// One recorded op: the tensors it read and how to push the output gradient
// back into them.
struct Node {
  std::string_view kind;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::shared_ptr<Node> node;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major float64 tensor. Copies are shallow handles onto the same
/// storage; use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  /// Gradient buffer; all zeros if nothing has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// True when this tensor was produced by a recorded op.
  bool has_node() const;
  std::string_view op_kind() const;

  /// Independent copy of the values, detached from any graph.
  Tensor clone() const;
  Tensor detach() const { return clone(); }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}

 private:
  detail::TensorImpl& checked() const;

  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Whether new ops record graph nodes on this thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an op output. A node is attached only when grad mode is on and at
/// least one input requires grad.
Tensor make_result(Shape shape, std::vector<double> values,
                   std::string_view kind, std::initializer_list<Tensor> inputs,
                   detail::BackwardFn backward);
Tensor make_result(Shape shape, std::vector<double> values,
                   std::string_view kind, const std::vector<Tensor>& inputs,
                   detail::BackwardFn backward);

/// Op nodes reachable from root, ordered so every producer precedes its
/// consumers.
std::vector<const detail::TensorImpl*> topological_order(const Tensor& root);

struct BackwardOptions {
  double seed = 1.0;
  /// Called once per op node, in the order backward visits them.
  std::function<void(std::string_view kind)> on_visit;
};

/// Reverse-mode accumulation from a scalar. Leaf gradients accumulate across
/// calls until zero_grad().
void backward(const Tensor& loss, const BackwardOptions& options = {});

}  // namespace shnet
