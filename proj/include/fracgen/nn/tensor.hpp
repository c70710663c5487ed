#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <unordered_set>
#include <vector>

#include "fracgen/core/error.hpp"

namespace fracgen::nn {

inline size_t numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}

/// One value in the computation graph. Nodes are created in topological
/// order, so walking ids backwards is a valid reverse sweep.
template <typename T>
struct Node {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;  // sized lazily on first backward pass
  bool requires_grad = false;
  uint64_t id = 0;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backprop;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), T(0));
  }
};

inline uint64_t next_node_id() {
  static uint64_t counter = 0;
  return ++counter;
}

/// Shared-ownership handle to a graph node; cheap to copy.
template <typename T>
class Tensor {
 public:
  std::shared_ptr<Node<T>> node;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> n) : node(std::move(n)) {}

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static Tensor filled(std::vector<int> shape, T value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->values.assign(numel(shape), value);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    n->id = next_node_id();
    return Tensor(std::move(n));
  }

  static Tensor from(std::vector<int> shape, std::vector<T> values, bool requires_grad = false) {
    if (numel(shape) != values.size()) throw ConfigError("tensor shape does not match data size");
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    n->id = next_node_id();
    return Tensor(std::move(n));
  }

  const std::vector<int>& shape() const { return node->shape; }
  size_t size() const { return node->values.size(); }
  std::vector<T>& values() { return node->values; }
  const std::vector<T>& values() const { return node->values; }
  std::vector<T>& grad() {
    node->ensure_grad();
    return node->grad;
  }
  bool requires_grad() const { return node->requires_grad; }

  T item() const {
    if (node->values.size() != 1) throw ConfigError("item() needs a scalar tensor");
    return node->values[0];
  }

  /// Copy of the values as a fresh leaf outside the graph.
  Tensor detach() const {
    auto n = std::make_shared<Node<T>>();
    n->shape = node->shape;
    n->values = node->values;
    n->requires_grad = false;
    n->id = next_node_id();
    return Tensor(std::move(n));
  }

  void zero_grad() {
    if (!node->grad.empty()) std::fill(node->grad.begin(), node->grad.end(), T(0));
  }
};

/// Glue for ops: wire up the result node and keep the graph only when a
/// parent actually needs gradients.
template <typename T>
Tensor<T> make_result(std::vector<int> shape, std::vector<T> values,
                      std::vector<Tensor<T>> parents, std::function<void(Node<T>&)> backprop) {
#ifndef NDEBUG
  for (T v : values)
    if (!std::isfinite(static_cast<double>(v))) throw NumericError("non-finite value produced");
#endif
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->id = next_node_id();
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.node->requires_grad;
  n->requires_grad = needs;
  if (needs) {
    for (auto& p : parents) n->parents.push_back(p.node);
    n->backprop = std::move(backprop);
  }
  return Tensor<T>(std::move(n));
}

/// Reverse sweep from a scalar loss. Interior nodes are re-zeroed each call;
/// leaf gradients accumulate until zero_grad(), so repeated passes sum.
template <typename T>
void backward(Tensor<T>& loss) {
  if (loss.size() != 1) throw ConfigError("backward needs a scalar loss");
  if (!loss.node->requires_grad) throw ConfigError("backward on a detached graph");

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack = {loss.node.get()};
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    order.push_back(n);
    for (const auto& p : n->parents)
      if (p->requires_grad) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });

  for (Node<T>* n : order) {
    n->ensure_grad();
    if (n->backprop) std::fill(n->grad.begin(), n->grad.end(), T(0));
  }
  loss.node->grad[0] = T(1);
  for (Node<T>* n : order)
    if (n->backprop) n->backprop(*n);
}

}  // namespace fracgen::nn
