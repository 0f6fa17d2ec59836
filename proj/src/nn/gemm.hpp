#pragma once

#include <cstddef>

namespace dasco::nn::detail {

// C[m,n] = alpha * op(A) * op(B) + beta * C, row-major.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
          const float* b, float beta, float* c);

}  // namespace dasco::nn::detail
