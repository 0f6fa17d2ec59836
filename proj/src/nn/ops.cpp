#include "dasco/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "dasco/error.hpp"
#include "nn/gemm.hpp"

namespace dasco::nn {

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands must live on the same tape");
  }
}

Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (a.numel() == 1) return b.shape();
  if (b.numel() == 1) return a.shape();
  throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                       " do not broadcast");
}

// f(x, y) -> out; da(x, y, out) and db(x, y, out) are the local partials.
template <class F, class DA, class DB>
Var binary(const char* op, Var a, Var b, F f, DA da, DB db) {
  require_same_tape(a, b, op);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(broadcast_shape(av, bv, op));
  const bool a_bcast = av.numel() == 1 && out.numel() != 1;
  const bool b_bcast = bv.numel() == 1 && out.numel() != 1;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = f(av[a_bcast ? 0 : i], bv[b_bcast ? 0 : i]);
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape()->record(op, std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(ib);
    const Tensor& o = t.value(self);
    Tensor* gx = t.accumulator(ia);
    Tensor* gy = t.accumulator(ib);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const float xv = x[a_bcast ? 0 : i];
      const float yv = y[b_bcast ? 0 : i];
      if (gx) (*gx)[a_bcast ? 0 : i] += g[i] * da(xv, yv, o[i]);
      if (gy) (*gy)[b_bcast ? 0 : i] += g[i] * db(xv, yv, o[i]);
    }
  });
}

// f(x) -> out; df(x, out) is the local derivative.
template <class F, class DF>
Var unary(const char* op, Var x, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(xv[i]);
  const std::size_t ix = x.id();
  return x.tape()->record(op, std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    const Tensor& in = t.value(ix);
    const Tensor& o = t.value(self);
    Tensor* gx = t.accumulator(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) (*gx)[i] += g[i] * df(in[i], o[i]);
  });
}

float stable_softplus(float z) { return z > 0.0f ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
float stable_sigmoid(float z) {
  if (z >= 0.0f) return 1.0f / (1.0f + std::exp(-z));
  const float e = std::exp(z);
  return e / (1.0f + e);
}

}  // namespace

Var linear(Var x, Var weight, Var bias) {
  require_same_tape(x, weight, "linear");
  require_same_tape(x, bias, "linear");
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  if (wv.rank() != 2) throw DimensionError("linear: weight must be rank 2, got " + shape_string(wv.shape()));
  const std::size_t batch = xv.rows();
  const std::size_t in = wv.shape()[1];
  const std::size_t out_dim = wv.shape()[0];
  if (xv.cols() != in) {
    throw DimensionError("linear: input " + shape_string(xv.shape()) + " does not match weight " +
                         shape_string(wv.shape()));
  }
  if (bv.numel() != out_dim) throw DimensionError("linear: bias " + shape_string(bv.shape()) + " for output " + std::to_string(out_dim));
  Tensor out({batch, out_dim});
  for (std::size_t r = 0; r < batch; ++r) std::copy(bv.data(), bv.data() + out_dim, out.data() + r * out_dim);
  detail::gemm(false, true, batch, out_dim, in, 1.0f, xv.data(), wv.data(), 1.0f, out.data());
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape()->record("linear", std::move(out), {ix, iw, ib}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    if (Tensor* gx = t.accumulator(ix)) {
      detail::gemm(false, false, batch, in, out_dim, 1.0f, g.data(), t.value(iw).data(), 1.0f, gx->data());
    }
    if (Tensor* gw = t.accumulator(iw)) {
      detail::gemm(true, false, out_dim, in, batch, 1.0f, g.data(), t.value(ix).data(), 1.0f, gw->data());
    }
    if (Tensor* gb = t.accumulator(ib)) {
      for (std::size_t r = 0; r < batch; ++r) {
        for (std::size_t c = 0; c < out_dim; ++c) (*gb)[c] += g[r * out_dim + c];
      }
    }
  });
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw DimensionError("matmul: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  }
  Tensor out({m, n});
  detail::gemm(false, false, m, n, k, 1.0f, av.data(), bv.data(), 0.0f, out.data());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record("matmul", std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    if (Tensor* ga = t.accumulator(ia)) detail::gemm(false, true, m, k, n, 1.0f, g.data(), t.value(ib).data(), 1.0f, ga->data());
    if (Tensor* gb = t.accumulator(ib)) detail::gemm(true, false, k, n, m, 1.0f, t.value(ia).data(), g.data(), 1.0f, gb->data());
  });
}

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](float x, float y) { return x + y; }, [](float, float, float) { return 1.0f; },
      [](float, float, float) { return 1.0f; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](float x, float y) { return x - y; }, [](float, float, float) { return 1.0f; },
      [](float, float, float) { return -1.0f; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](float x, float y) { return x * y; }, [](float, float y, float) { return y; },
      [](float x, float, float) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      "div", a, b, [](float x, float y) { return x / y; }, [](float, float y, float) { return 1.0f / y; },
      [](float x, float y, float) { return -x / (y * y); });
}

Var neg(Var x) {
  return unary("neg", x, [](float v) { return -v; }, [](float, float) { return -1.0f; });
}

Var scale(Var x, float factor) {
  return unary("scale", x, [factor](float v) { return v * factor; }, [factor](float, float) { return factor; });
}

Var add_scalar(Var x, float value) {
  return unary("add_scalar", x, [value](float v) { return v + value; }, [](float, float) { return 1.0f; });
}

Var relu(Var x) {
  return unary("relu", x, [](float v) { return v > 0.0f ? v : 0.0f; }, [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Var tanh(Var x) {
  return unary("tanh", x, [](float v) { return std::tanh(v); }, [](float, float o) { return 1.0f - o * o; });
}

Var sigmoid(Var x) {
  return unary("sigmoid", x, stable_sigmoid, [](float, float o) { return o * (1.0f - o); });
}

Var log_sigmoid(Var x) {
  return unary(
      "log_sigmoid", x, [](float v) { return -stable_softplus(-v); }, [](float v, float) { return stable_sigmoid(-v); });
}

Var softplus(Var x) {
  return unary("softplus", x, stable_softplus, [](float v, float) { return stable_sigmoid(v); });
}

Var exp(Var x) {
  return unary("exp", x, [](float v) { return std::exp(v); }, [](float, float o) { return o; });
}

Var log(Var x) {
  return unary("log", x, [](float v) { return std::log(v); }, [](float v, float) { return 1.0f / v; });
}

Var square(Var x) {
  return unary("square", x, [](float v) { return v * v; }, [](float v, float) { return 2.0f * v; });
}

Var clamp(Var x, float lo, float hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  return unary(
      "clamp", x, [lo, hi](float v) { return std::clamp(v, lo, hi); },
      [lo, hi](float v, float) { return v >= lo && v <= hi ? 1.0f : 0.0f; });
}

Var minimum(Var a, Var b) {
  return binary(
      "minimum", a, b, [](float x, float y) { return y < x ? y : x; },
      [](float x, float y, float) { return y < x ? 0.0f : 1.0f; }, [](float x, float y, float) { return y < x ? 1.0f : 0.0f; });
}

Var sum(Var x) {
  const Tensor& xv = x.value();
  double acc = 0.0;
  for (float v : xv.values()) acc += v;
  const std::size_t ix = x.id();
  return x.tape()->record("sum", Tensor::scalar(static_cast<float>(acc)), {ix}, [=](Tape& t, std::size_t self) {
    const float g = t.upstream(self)[0];
    Tensor* gx = t.accumulator(ix);
    for (auto& v : gx->values()) v += g;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().numel();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), 1.0f / static_cast<float>(n));
}

Var row_sum(Var x) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor out({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    float acc = 0.0f;
    for (std::size_t c = 0; c < cols; ++c) acc += xv[r * cols + c];
    out[r] = acc;
  }
  const std::size_t ix = x.id();
  return x.tape()->record("row_sum", std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    Tensor* gx = t.accumulator(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) (*gx)[r * cols + c] += g[r];
    }
  });
}

Var concat_cols(Var a, Var b) {
  require_same_tape(a, b, "concat_cols");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw DimensionError("concat_cols: " + shape_string(av.shape()) + " and " + shape_string(bv.shape()));
  }
  const std::size_t rows = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor out({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record("concat_cols", std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    Tensor* ga = t.accumulator(ia);
    Tensor* gb = t.accumulator(ib);
    for (std::size_t r = 0; r < rows; ++r) {
      if (ga) {
        for (std::size_t c = 0; c < ca; ++c) (*ga)[r * ca + c] += g[r * (ca + cb) + c];
      }
      if (gb) {
        for (std::size_t c = 0; c < cb; ++c) (*gb)[r * cb + c] += g[r * (ca + cb) + ca + c];
      }
    }
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (begin + count > cols) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of " + std::to_string(cols) + " columns");
  }
  Tensor out({rows, count});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.data() + r * cols + begin, count, out.data() + r * count);
  const std::size_t ix = x.id();
  return x.tape()->record("slice_cols", std::move(out), {ix}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.upstream(self);
    Tensor* gx = t.accumulator(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < count; ++c) (*gx)[r * cols + begin + c] += g[r * count + c];
    }
  });
}

Var stop_gradient(Var x) { return x.tape()->constant(x.value()); }

Var mse(Var a, Var b) { return mean(square(sub(a, b))); }

Var mse(Var a, float target) { return mean(square(add_scalar(a, -target))); }

Var bce_with_logits(Var logits, float target) {
  return mean(sub(softplus(logits), scale(logits, target)));
}

}  // namespace dasco::nn
