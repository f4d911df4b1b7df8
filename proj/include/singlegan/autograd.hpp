#pragma once

// Tape-free reverse-mode autodiff over Tensor values.
//
// A Var is a shared handle to a graph node. Ops create result nodes that keep
// their inputs alive and a closure that pushes the result's gradient into the
// inputs. Var::backward() walks the graph in reverse topological order.
// Copying a Var aliases the node; use detach() for an independent copy.

#include <functional>
#include <memory>
#include <vector>

#include "singlegan/tensor.hpp"

namespace singlegan {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until the first gradient arrives
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  // Zero-filled on first use.
  Tensor<T>& grad_buffer() {
    if (grad.empty() && !value.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
  // Gradient sink for input `i`, or nullptr when that input needs none.
  T* input_grad(std::size_t i) {
    return inputs[i]->requires_grad ? inputs[i]->grad_buffer().data() : nullptr;
  }
};

bool grad_enabled();

// Disables graph construction on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t numel() const { return node_->value.numel(); }
  T item() const { return node_->value.item(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient, or zeros of the value's shape when none has been accumulated.
  Tensor<T> grad() const { return has_grad() ? node_->grad : Tensor<T>(shape()); }
  void zero_grad() { node_->grad = Tensor<T>(); }

  // Independent leaf holding a copy of the value.
  Var detach() const { return Var(node_->value, false); }

  // Accumulates d(this)/d(leaf) into every reachable leaf that requires
  // grad. `this` must be a scalar unless a seed gradient is supplied.
  void backward() const;
  void backward(const Tensor<T>& seed) const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Builds an op result. The backward closure is attached only when grad mode
// is on and some input requires grad.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (grad_enabled()) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (auto& in : inputs) node->inputs.push_back(in.node());
      node->backward_fn = std::move(fn);
    }
  }
  return Var<T>(std::move(node));
}

extern template class Var<float>;
extern template class Var<double>;

}  // namespace singlegan
