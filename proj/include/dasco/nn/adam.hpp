#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dasco/nn/tape.hpp"

namespace dasco::nn {

struct AdamOptions {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment estimates for one parameter list. The list is passed on every step
// rather than stored, so the owning network can move freely.
class Adam {
 public:
  Adam() = default;
  Adam(std::span<Parameter* const> params, AdamOptions options = {});

  /// Applies one bias-corrected Adam update using each parameter's `grad`.
  void step(std::span<Parameter* const> params);

  std::int64_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t t_ = 0;
};

}  // namespace dasco::nn
