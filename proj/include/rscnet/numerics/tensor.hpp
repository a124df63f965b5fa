#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rscnet/numerics/array.hpp"

namespace rscnet {

template <typename T>
struct Node {
  Array<T> value;
  Array<T> grad;  // empty until a backward pass reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward_fn;
};

// Handle to a node of the reverse-mode graph. Copies share the node.
//
// Values are immutable once an op produced them; only leaves (parameters)
// are rewritten in place, by the optimizer, outside of any live graph.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Array<T> value, bool requires_grad = false) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor constant(Array<T> value) { return leaf(std::move(value), false); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  std::size_t rank() const { return node_->value.rank(); }
  std::size_t numel() const { return node_->value.size(); }

  const Array<T>& value() const { return node_->value; }
  Array<T>& mutable_value() { return node_->value; }
  const Array<T>& grad() const { return node_->grad; }
  Array<T>& mutable_grad() { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }

  T item() const {
    check_shape(numel() == 1, fmt::format("item() on tensor of shape {}", shape_str(shape())));
    return node_->value[0];
  }

  // Scalar-only. Overwrites (never accumulates) grads of every node reachable
  // from this one that requires grad.
  void backward() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node<T>> node_;
};

// Builds an op result. When no input needs a gradient the node is detached
// and `backward_fn` is dropped. Throws NumericError if `value` is not finite.
template <typename T>
Tensor<T> make_result(const char* op, Array<T> value, std::vector<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward_fn);

// Allocates a zero grad buffer on first use.
template <typename T>
Array<T>& grad_slot(Node<T>& node) {
  if (node.grad.empty()) node.grad = Array<T>(node.value.shape());
  return node.grad;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  loss.backward();
}

}  // namespace rscnet
