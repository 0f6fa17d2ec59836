#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dasco/nn/tensor.hpp"

namespace dasco::nn {

/// Trainable tensor with its gradient buffer. Owned by a network, referenced
/// by a tape for the duration of one step.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name_, Tensor value_) : name(std::move(name_)), value(std::move(value_)), grad(Tensor::zeros_like(value)) {}

  std::string name;
  Tensor value;
  Tensor grad;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; invalid once the tape dies.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Zero-filled when nothing flowed into this node.
  Tensor grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode gradient tape. Nodes are appended in evaluation order, so a
// reverse sweep is a valid topological order. Rebuilt for every step.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the tape (readable through Var::grad).
  Var variable(Tensor value);
  /// Leaf bound to a parameter. Registering the same parameter twice returns
  /// the same node.
  Var param(Parameter& p);

  /// Records an operation result. `fn` runs during backward only when at
  /// least one input requires gradient.
  Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);

  /// Populates gradients from a single-element loss. Every parameter
  /// registered on this tape has its `grad` overwritten; parameters the loss
  /// does not reach end up with zero gradient.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  Tensor grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Upstream gradient of node `id` during backward.
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient accumulator of an input node, allocated lazily. Returns nullptr
  /// when the node does not require gradient.
  Tensor* accumulator(std::size_t id);

  Var var(std::size_t id) { return Var(this, id); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

}  // namespace dasco::nn
