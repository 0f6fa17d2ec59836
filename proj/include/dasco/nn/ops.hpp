#pragma once

#include "dasco/nn/tape.hpp"

// Differentiable operations. Elementwise binary ops accept equal shapes or a
// single-element operand on either side. Each op checks its output for
// non-finite values and throws NumericError.
namespace dasco::nn {

/// x [B, in] times W^T for W [out, in], plus bias [out] on every row.
Var linear(Var x, Var weight, Var bias);
/// a [m, k] times b [k, n].
Var matmul(Var a, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var x);
Var scale(Var x, float factor);
Var add_scalar(Var x, float value);

Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);
Var log_sigmoid(Var x);
Var softplus(Var x);
Var exp(Var x);
Var log(Var x);
Var square(Var x);
/// Gradient passes only where lo <= x <= hi.
Var clamp(Var x, float lo, float hi);
/// Elementwise minimum; gradient goes to the smaller argument, ties to `a`.
Var minimum(Var a, Var b);

Var sum(Var x);
Var mean(Var x);
/// [B, k] -> [B, 1].
Var row_sum(Var x);

Var concat_cols(Var a, Var b);
Var slice_cols(Var x, std::size_t begin, std::size_t count);

/// Copy of x that contributes no gradient upstream.
Var stop_gradient(Var x);

/// mean((a - b)^2).
Var mse(Var a, Var b);
/// mean((x - target)^2) against a constant target.
Var mse(Var a, float target);
/// mean(softplus(z) - target * z), the stable form of binary cross-entropy on logits.
Var bce_with_logits(Var logits, float target);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var x) { return neg(x); }

}  // namespace dasco::nn
