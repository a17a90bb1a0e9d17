#include "bda/autograd.hpp"

#include <unordered_set>

#include "bda/errors.hpp"

namespace bda {

Tensor& detail::Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Var(std::move(n));
}

Var Var::make(Tensor value, std::vector<Var> inputs,
              std::function<void(detail::Node&)> backward_fn) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.requires_grad()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (auto& in : inputs) n->inputs.push_back(in.node_);
    n->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(n));
}

void Var::backward() {
  if (!node_) throw ContractError("backward() on undefined Var");
  if (node_->value.numel() != 1) {
    throw ContractError("backward() requires a single-element value, got " +
                        shape_str(node_->value.shape()));
  }
  if (!node_->value.all_finite()) {
    throw NumericError("backward(): loss value is not finite");
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS yields a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      detail::Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->backward_fn || n->grad.empty()) continue;
    if (!n->grad.all_finite()) {
      throw NumericError("backward(): non-finite gradient encountered");
    }
    n->backward_fn(*n);
  }
}

Parameter::Parameter(std::string name, Tensor value)
    : name_(std::move(name)),
      var_(Var::leaf(std::move(value), true)),
      m_(var_.shape(), 0.0),
      v_(var_.shape(), 0.0) {}

}  // namespace bda
