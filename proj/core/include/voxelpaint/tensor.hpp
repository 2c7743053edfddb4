#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace voxelpaint {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-filled on first use.
  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T{0});
    return grad;
  }
};

}  // namespace detail

/// Thread-local switch for graph recording. While disabled, ops produce
/// plain values with no parents, so eval passes keep no intermediates alive.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major tensor with an attached reverse-mode graph node.
///
/// A Tensor is a handle: copies share the node. Values of a tensor that has
/// been consumed by an op must not be mutated until the graph is dropped;
/// only leaves (parameters, inputs) expose mutable storage, and only the
/// optimizer should write to them between steps.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodeType = detail::Node<T>;
  using BackwardFn = std::function<void(NodeType&)>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  /// Result of a differentiable op. Parents and the backward closure are kept
  /// only when grad mode is on and at least one parent requires a gradient.
  static Tensor from_op(Shape shape, std::vector<T> values, std::vector<Tensor> parents,
                        BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const T> values() const;
  std::span<T> mutable_values();
  T item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);

  /// Accumulated gradient; zeros when nothing has reached this tensor.
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  /// Reverse-mode sweep from this scalar. Leaf gradients accumulate; interior
  /// gradients are reset at the start of every sweep.
  void backward() const;

  /// Same values, fresh leaf, no history.
  Tensor detach() const;

  NodeType& node() const { return *node_; }
  const std::shared_ptr<NodeType>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<NodeType> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

/// Elementwise conversion between precisions, producing a new leaf.
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& source, bool requires_grad) {
  std::vector<To> values(source.values().begin(), source.values().end());
  return Tensor<To>(source.shape(), std::move(values), requires_grad);
}

}  // namespace voxelpaint
