#include "rscnet/numerics/tensor.hpp"

#include <unordered_set>

namespace rscnet {

template <typename T>
Tensor<T> make_result(const char* op, Array<T> value, std::vector<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward_fn) {
  if (!all_finite<T>(value.values())) throw NumericError(fmt::format("{}: non-finite value in output", op));
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.defined() && in.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) node->parents.push_back(in.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
void Tensor<T>::backward() const {
  check_shape(numel() == 1, fmt::format("backward() needs a scalar loss, got shape {}", shape_str(shape())));
  if (!requires_grad()) return;

  // Iterative post-order DFS over nodes that require grad.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<T>* p = n->parents[next++].get();
      if (p != nullptr && p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node<T>* n : order) {
    if (n->grad.shape() == n->value.shape()) {
      n->grad.fill(T(0));
    } else {
      n->grad = Array<T>(n->value.shape());
    }
  }
  node_->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(const char*, Array<float>, std::vector<Tensor<float>>,
                                   std::function<void(Node<float>&)>);
template Tensor<double> make_result(const char*, Array<double>, std::vector<Tensor<double>>,
                                    std::function<void(Node<double>&)>);

}  // namespace rscnet
