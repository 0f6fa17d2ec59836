#include "dasco/nn/mlp.hpp"

#include <cmath>

#include "dasco/error.hpp"
#include "dasco/nn/ops.hpp"
#include "nn/gemm.hpp"

namespace dasco::nn {

Mlp::Mlp(std::string name, std::vector<std::size_t> layer_sizes, Activation activation, Rng& rng)
    : name_(std::move(name)), sizes_(std::move(layer_sizes)), activation_(activation) {
  if (sizes_.size() < 2) throw ContractError("Mlp needs at least input and output sizes");
  for (std::size_t s : sizes_) {
    if (s == 0) throw ContractError("Mlp layer sizes must be positive");
  }
  weights_.reserve(sizes_.size() - 1);
  biases_.reserve(sizes_.size() - 1);
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    const float bound = 1.0f / std::sqrt(static_cast<float>(sizes_[i]));
    const std::string prefix = name_ + ".l" + std::to_string(i);
    weights_.emplace_back(prefix + ".weight", rng.uniform_tensor({sizes_[i + 1], sizes_[i]}, -bound, bound));
    biases_.emplace_back(prefix + ".bias", rng.uniform_tensor({sizes_[i + 1]}, -bound, bound));
  }
}

Var Mlp::forward(Tape& tape, Var input) {
  if (input.value().cols() != in_dim()) {
    throw DimensionError(name_ + ": input " + shape_string(input.shape()) + " but network expects width " +
                         std::to_string(in_dim()));
  }
  Var h = input;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    h = linear(h, tape.param(weights_[i]), tape.param(biases_[i]));
    if (i + 1 < weights_.size()) h = activation_ == Activation::Relu ? relu(h) : tanh(h);
  }
  return h;
}

Tensor Mlp::predict(const Tensor& input) const {
  if (input.cols() != in_dim()) {
    throw DimensionError(name_ + ": input " + shape_string(input.shape()) + " but network expects width " +
                         std::to_string(in_dim()));
  }
  const std::size_t batch = input.rows();
  Tensor h({batch, in_dim()}, std::vector<float>(input.values().begin(), input.values().end()));
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const std::size_t out = sizes_[i + 1];
    Tensor next({batch, out});
    for (std::size_t r = 0; r < batch; ++r) {
      std::copy_n(biases_[i].value.data(), out, next.data() + r * out);
    }
    detail::gemm(false, true, batch, out, sizes_[i], 1.0f, h.data(), weights_[i].value.data(), 1.0f, next.data());
    if (i + 1 < weights_.size()) {
      for (auto& v : next.values()) v = activation_ == Activation::Relu ? (v > 0.0f ? v : 0.0f) : std::tanh(v);
    }
    h = std::move(next);
  }
  if (!h.all_finite()) throw NumericError(name_ + ": non-finite activations");
  return h;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(&weights_[i]);
    out.push_back(&biases_[i]);
  }
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back(&weights_[i]);
    out.push_back(&biases_[i]);
  }
  return out;
}

void soft_update(std::span<Parameter* const> target, std::span<const Parameter* const> online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ContractError("soft_update: tau must lie in [0, 1]");
  if (target.size() != online.size()) throw DimensionError("soft_update: parameter lists differ in length");
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!target[i]->value.same_shape(online[i]->value)) {
      throw DimensionError("soft_update: shape mismatch for " + target[i]->name);
    }
  }
  const auto keep = static_cast<float>(1.0 - tau);
  const auto take = static_cast<float>(tau);
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto dst = target[i]->value.values();
    auto src = online[i]->value.values();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = keep * dst[j] + take * src[j];
  }
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  const auto dst = target.parameters();
  const auto src = online.parameters();
  soft_update(dst, src, tau);
}

}  // namespace dasco::nn
