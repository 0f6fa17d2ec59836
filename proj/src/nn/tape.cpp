#include "dasco/nn/tape.hpp"

#include <algorithm>

#include "dasco/error.hpp"

namespace dasco::nn {

const Tensor& Var::value() const { return tape_->value(id_); }
Tensor Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node node;
  node.value = p.value;
  node.requires_grad = true;
  node.param = &p;
  nodes_.push_back(std::move(node));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite output from ") + op);
  Node node;
  node.value = std::move(value);
  node.requires_grad = std::any_of(inputs.begin(), inputs.end(), [&](std::size_t i) { return nodes_[i].requires_grad; });
  if (node.requires_grad) {
    node.inputs = std::move(inputs);
    node.backward = std::move(fn);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::grad(std::size_t id) const {
  const Node& node = nodes_[id];
  return node.grad.empty() ? Tensor::zeros_like(node.value) : node.grad;
}

Tensor* Tape::accumulator(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return nullptr;
  if (node.grad.empty()) node.grad = Tensor::zeros_like(node.value);
  return &node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (loss.value().numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_string(loss.value().shape()));
  }
  for (auto& node : nodes_) {
    if (!node.grad.empty()) node.grad.fill(0.0f);
  }
  if (Tensor* seed = accumulator(loss.id())) seed->fill(1.0f);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty() || !node.backward) continue;
    node.backward(*this, i);
  }
  for (auto& node : nodes_) {
    if (node.param == nullptr) continue;
    if (node.grad.empty()) {
      node.param->grad = Tensor::zeros_like(node.param->value);
    } else {
      node.param->grad = node.grad;
    }
    if (!node.param->grad.all_finite()) throw NumericError("non-finite gradient for " + node.param->name);
  }
}

}  // namespace dasco::nn
