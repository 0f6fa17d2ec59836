#include "dasco/nn/adam.hpp"

#include <cmath>

#include "dasco/error.hpp"

namespace dasco::nn {

Adam::Adam(std::span<Parameter* const> params, AdamOptions options) : options_(options) {
  for (const Parameter* p : params) {
    m_.push_back(Tensor::zeros_like(p->value));
    v_.push_back(Tensor::zeros_like(p->value));
  }
}

void Adam::step(std::span<Parameter* const> params) {
  if (params.size() != m_.size()) throw DimensionError("adam: parameter count changed since construction");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->grad.same_shape(m_[i]) || !params[i]->value.same_shape(m_[i])) {
      throw DimensionError("adam: shape mismatch for " + params[i]->name);
    }
    if (!params[i]->grad.all_finite()) throw NumericError("adam: non-finite gradient for " + params[i]->name);
  }
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const auto lr = static_cast<float>(options_.learning_rate);
  const auto eps = static_cast<float>(options_.epsilon);
  const auto fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
  const auto inv_c1 = static_cast<float>(1.0 / correction1);
  const auto inv_c2 = static_cast<float>(1.0 / correction2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i]->value.values();
    auto grad = params[i]->grad.values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t j = 0; j < value.size(); ++j) {
      const float g = grad[j];
      m[j] = fb1 * m[j] + (1.0f - fb1) * g;
      v[j] = fb2 * v[j] + (1.0f - fb2) * g * g;
      const float m_hat = m[j] * inv_c1;
      const float v_hat = v[j] * inv_c2;
      value[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

}  // namespace dasco::nn
