#include "crossgen/tensor/autodiff.hpp"

#include <unordered_set>

#include "crossgen/util/errors.hpp"

namespace crossgen::tensor {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
BasicTensor<T>& detail::Node<T>::grad_buffer() {
  if (grad.empty()) grad = BasicTensor<T>(value.shape());
  return grad;
}

template <typename T>
BasicVar<T> BasicVar<T>::constant(BasicTensor<T> value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return BasicVar(std::move(node));
}

template <typename T>
BasicVar<T> BasicVar<T>::parameter(BasicTensor<T> value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return BasicVar(std::move(node));
}

template <typename T>
BasicVar<T> BasicVar<T>::from_op(BasicTensor<T> value, std::vector<BasicVar> inputs,
                                 std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    for (const auto& in : inputs) {
      if (in.defined() && in.requires_grad()) {
        node->requires_grad = true;
        break;
      }
    }
  }
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node_);
    node->backward = std::move(backward_fn);
  }
  return BasicVar(std::move(node));
}

template <typename T>
void BasicVar<T>::zero_grad() {
  node_->grad_buffer().fill(T(0));
}

template <typename T>
void backward(const BasicVar<T>& loss) {
  using Node = detail::Node<T>;
  if (!loss.defined()) throw Error("backward: undefined loss");
  if (loss.value().size() != 1)
    throw DimensionError("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS; `order` ends up topologically sorted.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) {
      node->backward(*node);
      // Interior gradients are consumed; only leaves keep theirs.
      node->grad = BasicTensor<T>();
    }
  }
}

template class BasicVar<float>;
template class BasicVar<double>;
template void backward<float>(const BasicVar<float>&);
template void backward<double>(const BasicVar<double>&);

}  // namespace crossgen::tensor
