#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "core/tensor.hpp"

namespace mlfg {

// Reverse-mode autodiff over a dynamically built graph. Each forward op
// produces a Node holding the value plus a closure that routes the node's
// gradient into its parents. Gradients accumulate in fixed order, so a
// backward pass is bit-reproducible.

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily; empty means "all zero so far"
  bool requires_grad = false;
  std::vector<Var<T>> parents;
  std::function<void(Node<T>&)> backward_fn;

  void ensure_grad() {
    if (grad.empty()) grad = Tensor<T>::zeros(value.shape);
  }

  // Accumulate g (same shape as value) into this node's gradient.
  void accumulate(const T* g) {
    ensure_grad();
    T* dst = grad.ptr();
    int64_t n = grad.numel();
    for (int64_t i = 0; i < n; ++i) dst[i] += g[i];
  }
};

template <typename T>
Var<T> make_leaf(Tensor<T> value, bool requires_grad = false) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

template <typename T>
Var<T> constant(Tensor<T> value) {
  return make_leaf(std::move(value), false);
}

// Thread-local gradient mode; ops skip building backward closures when off.
struct GradMode {
  static bool& flag() {
    thread_local bool enabled = true;
    return enabled;
  }
  static bool enabled() { return flag(); }
};

struct NoGradGuard {
  bool saved;
  NoGradGuard() : saved(GradMode::flag()) { GradMode::flag() = false; }
  ~NoGradGuard() { GradMode::flag() = saved; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Run backward from a scalar loss. Topological order is rebuilt per call;
// parameter leaves keep their accumulated gradients afterwards.
template <typename T>
void backward(const Var<T>& loss) {
  if (!loss) throw std::invalid_argument("backward: null var");
  if (loss->value.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss->value.shape));
  if (!loss->requires_grad) return;  // nothing trainable upstream

  // Iterative post-order DFS.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  struct Frame {
    Node<T>* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.get(), 0});
  visited.insert(loss.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node<T>* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad.data[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

}  // namespace mlfg
