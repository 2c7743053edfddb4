#include "voxelpaint/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "voxelpaint/error.hpp"

namespace voxelpaint {

namespace {
thread_local bool grad_mode_enabled = true;
}  // namespace

bool GradMode::enabled() { return grad_mode_enabled; }
void GradMode::set_enabled(bool enabled) { grad_mode_enabled = enabled; }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : node_(std::make_shared<NodeType>()) {
  require(shape_numel(shape) == values.size(), ErrorCode::kShapeMismatch,
          "tensor buffer of " + std::to_string(values.size()) + " elements does not match shape " +
              shape_string(shape));
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T{0}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_op(Shape shape, std::vector<T> values, std::vector<Tensor> parents,
                             BackwardFn backward) {
  Tensor result(std::move(shape), std::move(values), false);
  if (!GradMode::enabled()) return result;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& p) { return p.defined() && p.requires_grad(); });
  if (!any) return result;
  result.node_->requires_grad = true;
  result.node_->parents.reserve(parents.size());
  for (auto& p : parents) result.node_->parents.push_back(p.node_);
  result.node_->backward = std::move(backward);
  return result;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  return node_->shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  require(axis < node_->shape.size(), ErrorCode::kShapeMismatch,
          "axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape()));
  return node_->shape[axis];
}

template <typename T>
std::size_t Tensor<T>::numel() const {
  return node_->value.size();
}

template <typename T>
std::span<const T> Tensor<T>::values() const {
  return node_->value;
}

template <typename T>
std::span<T> Tensor<T>::mutable_values() {
  return node_->value;
}

template <typename T>
T Tensor<T>::item() const {
  require(numel() == 1, ErrorCode::kShapeMismatch,
          "item() on non-scalar tensor " + shape_string(shape()));
  return node_->value[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return node_->requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool value) {
  node_->requires_grad = value;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  return node_->grad_buffer();
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  return node_->grad_buffer();
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T{0});
}

template <typename T>
void Tensor<T>::backward() const {
  require(numel() == 1, ErrorCode::kShapeMismatch,
          "backward() requires a scalar loss, got shape " + shape_string(shape()));
  require(std::isfinite(static_cast<double>(node_->value[0])), ErrorCode::kNumericFailure,
          "backward() on non-finite loss");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<NodeType*> order;
  std::unordered_set<NodeType*> visited;
  std::vector<std::pair<NodeType*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeType* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (NodeType* node : order) {
    if (node->backward) node->grad.clear();
  }
  node_->grad_buffer()[0] += T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeType* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->value, false);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace voxelpaint
