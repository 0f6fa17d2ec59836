#pragma once

#include <string>
#include <vector>

#include "dasco/nn/random.hpp"
#include "dasco/nn/tape.hpp"

namespace dasco::nn {

enum class Activation { Relu, Tanh };

// Fully connected network. Hidden layers use `activation`; the final layer is
// linear. Layer i holds weight [sizes[i+1], sizes[i]] and bias [sizes[i+1]],
// initialized uniformly in +-1/sqrt(fan_in).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string name, std::vector<std::size_t> layer_sizes, Activation activation, Rng& rng);

  Var forward(Tape& tape, Var input);
  /// Tape-free evaluation for inference.
  Tensor predict(const Tensor& input) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  const std::string& name() const { return name_; }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t in_dim() const { return sizes_.front(); }
  std::size_t out_dim() const { return sizes_.back(); }
  Activation activation() const { return activation_; }

 private:
  std::string name_;
  std::vector<std::size_t> sizes_;
  Activation activation_ = Activation::Relu;
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
};

/// target <- (1 - tau) * target + tau * online, parameter by parameter.
void soft_update(std::span<Parameter* const> target, std::span<const Parameter* const> online, double tau);
void soft_update(Mlp& target, const Mlp& online, double tau);

}  // namespace dasco::nn
