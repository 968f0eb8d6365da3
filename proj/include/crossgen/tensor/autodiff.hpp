#pragma once

// Reverse-mode differentiation over BasicTensor values.
//
// A BasicVar is a handle to a node of the recorded graph. Operations in
// ops.hpp build new nodes whose backward closures accumulate gradients into
// their inputs; backward() walks the graph from a scalar in reverse
// topological order. Values are never modified after an op writes them.

#include <functional>
#include <memory>
#include <vector>

#include "crossgen/tensor/tensor.hpp"

namespace crossgen::tensor {

template <typename T>
class BasicVar;

namespace detail {

template <typename T>
struct Node {
  BasicTensor<T> value;
  BasicTensor<T> grad;  // empty until something flows into this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;

  // Grad buffer of this node, zero-allocated on first use.
  BasicTensor<T>& grad_buffer();
};

}  // namespace detail

template <typename T>
class BasicVar {
 public:
  using Node = detail::Node<T>;

  BasicVar() = default;

  // Leaf that never receives a gradient.
  static BasicVar constant(BasicTensor<T> value);
  // Leaf that accumulates gradients (a trainable parameter).
  static BasicVar parameter(BasicTensor<T> value);

  // Interior node produced by an op. The closure is dropped (and no graph
  // edge kept) when no input requires a gradient or gradients are disabled.
  static BasicVar from_op(BasicTensor<T> value, std::vector<BasicVar> inputs,
                          std::function<void(Node&)> backward);

  bool defined() const { return node_ != nullptr; }
  const BasicTensor<T>& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }

  bool has_grad() const { return !node_->grad.empty(); }
  const BasicTensor<T>& grad() const { return node_->grad; }
  void zero_grad();
  void clear_grad() { node_->grad = BasicTensor<T>(); }

  // Parameter storage, for optimizers only.
  BasicTensor<T>& mutable_value() { return node_->value; }
  BasicTensor<T>& mutable_grad() { return node_->grad_buffer(); }

  // Same value, cut off from the graph.
  BasicVar detach() const { return constant(node_->value); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit BasicVar(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

using Var = BasicVar<float>;
using Var64 = BasicVar<double>;

// Populates gradients of every node reachable from `loss`, which must hold
// exactly one element. Leaf gradients accumulate across calls.
template <typename T>
void backward(const BasicVar<T>& loss);

// While alive, ops on this thread record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

extern template class BasicVar<float>;
extern template class BasicVar<double>;

}  // namespace crossgen::tensor
