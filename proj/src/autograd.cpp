#include "singlegan/autograd.hpp"

#include <unordered_set>
#include <utility>

namespace singlegan {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
void Var<T>::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward() without a seed needs a scalar, got " + shape_string(shape()));
  }
  backward(Tensor<T>(shape(), T(1)));
}

template <typename T>
void Var<T>::backward(const Tensor<T>& seed) const {
  if (seed.shape() != shape()) throw ShapeError("backward seed shape mismatch");
  if (!requires_grad()) return;

  // Iterative post-order DFS; `order` ends up inputs-before-outputs.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  Tensor<T>& root_grad = node_->grad_buffer();
  for (std::size_t i = 0; i < seed.numel(); ++i) root_grad[i] += seed[i];

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn && !node->grad.empty()) {
      node->backward_fn(*node);
      // Interior gradients are consumed exactly once.
      node->grad = Tensor<T>();
    }
  }
}

template class Var<float>;
template class Var<double>;

}  // namespace singlegan
