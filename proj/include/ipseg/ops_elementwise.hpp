#pragma once

#include <cmath>

#include "ipseg/tape.hpp"

namespace ipseg {

namespace detail {

template <typename T, typename F, typename DF>
Var<T> unary_map(Tape<T>& tape, const Var<T>& x, F f, DF df) {
  auto out = tape.node(x->shape, x);
  const size_t n = x->value.size();
  for (size_t i = 0; i < n; ++i) out->value[i] = f(x->value[i]);
  if (out->needs_grad) {
    tape.record([out, x, df] {
      if (!x->needs_grad) return;
      const size_t n = x->value.size();
      for (size_t i = 0; i < n; ++i) x->grad[i] += df(x->value[i], out->value[i]) * out->grad[i];
    });
  }
  return out;
}

template <typename T>
void expect_same_shape(const Var<T>& a, const Var<T>& b, const char* who) {
  IPSEG_CHECK(same_shape(a->shape, b->shape),
              who << ": shape mismatch " << shape_str(a->shape) << " vs " << shape_str(b->shape));
}

}  // namespace detail

template <typename T>
Var<T> leaky_relu(Tape<T>& tape, const Var<T>& x, T slope) {
  // subgradient at 0 is `slope` by convention
  return detail::unary_map(
      tape, x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> sigmoid(Tape<T>& tape, const Var<T>& x) {
  return detail::unary_map(
      tape, x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> log_op(Tape<T>& tape, const Var<T>& x) {
  return detail::unary_map(
      tape, x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Var<T> square(Tape<T>& tape, const Var<T>& x) {
  return detail::unary_map(
      tape, x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Var<T> abs_op(Tape<T>& tape, const Var<T>& x) {
  return detail::unary_map(
      tape, x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> scale(Tape<T>& tape, const Var<T>& x, T c) {
  return detail::unary_map(
      tape, x, [c](T v) { return c * v; }, [c](T, T) { return c; });
}

template <typename T>
Var<T> add_scalar(Tape<T>& tape, const Var<T>& x, T c) {
  return detail::unary_map(
      tape, x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

// 1 - x, the mask complement in the blending recursion
template <typename T>
Var<T> one_minus(Tape<T>& tape, const Var<T>& x) {
  return detail::unary_map(
      tape, x, [](T v) { return T(1) - v; }, [](T, T) { return T(-1); });
}

template <typename T>
Var<T> clamp(Tape<T>& tape, const Var<T>& x, T lo, T hi) {
  // pass-through gradient strictly inside the interval, zero outside
  return detail::unary_map(
      tape, x, [lo, hi](T v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); });
}

template <typename T>
Var<T> add(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::expect_same_shape(a, b, "add");
  auto out = tape.node(a->shape, a, b);
  const size_t n = a->value.size();
  for (size_t i = 0; i < n; ++i) out->value[i] = a->value[i] + b->value[i];
  if (out->needs_grad) {
    tape.record([out, a, b] {
      if (a->needs_grad) accumulate(a->grad, out->grad);
      if (b->needs_grad) accumulate(b->grad, out->grad);
    });
  }
  return out;
}

template <typename T>
Var<T> sub(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::expect_same_shape(a, b, "sub");
  auto out = tape.node(a->shape, a, b);
  const size_t n = a->value.size();
  for (size_t i = 0; i < n; ++i) out->value[i] = a->value[i] - b->value[i];
  if (out->needs_grad) {
    tape.record([out, a, b] {
      if (a->needs_grad) accumulate(a->grad, out->grad);
      if (b->needs_grad)
        for (size_t i = 0; i < b->grad.size(); ++i) b->grad[i] -= out->grad[i];
    });
  }
  return out;
}

template <typename T>
Var<T> mul(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  detail::expect_same_shape(a, b, "mul");
  auto out = tape.node(a->shape, a, b);
  const size_t n = a->value.size();
  for (size_t i = 0; i < n; ++i) out->value[i] = a->value[i] * b->value[i];
  if (out->needs_grad) {
    tape.record([out, a, b] {
      const size_t n = out->grad.size();
      if (a->needs_grad)
        for (size_t i = 0; i < n; ++i) a->grad[i] += b->value[i] * out->grad[i];
      if (b->needs_grad)
        for (size_t i = 0; i < n; ++i) b->grad[i] += a->value[i] * out->grad[i];
    });
  }
  return out;
}

// per-channel bias over NCHW
template <typename T>
Var<T> add_channel_bias(Tape<T>& tape, const Var<T>& x, const Var<T>& bias) {
  expect_nchw(x, "add_channel_bias");
  IPSEG_CHECK(bias->shape.size() == 1 && bias->dim(0) == x->dim(1),
              "add_channel_bias: bias length " << shape_str(bias->shape) << " vs channels "
                                               << x->dim(1));
  auto out = tape.node(x->shape, x, bias);
  const int64_t n = x->dim(0), c = x->dim(1), hw = x->dim(2) * x->dim(3);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < c; ++j) {
      const T b = bias->value[static_cast<size_t>(j)];
      const size_t base = static_cast<size_t>((i * c + j) * hw);
      for (int64_t p = 0; p < hw; ++p) out->value[base + static_cast<size_t>(p)] = x->value[base + static_cast<size_t>(p)] + b;
    }
  if (out->needs_grad) {
    tape.record([out, x, bias, n, c, hw] {
      if (x->needs_grad) accumulate(x->grad, out->grad);
      if (bias->needs_grad) {
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < c; ++j) {
            T s = T(0);
            const size_t base = static_cast<size_t>((i * c + j) * hw);
            for (int64_t p = 0; p < hw; ++p) s += out->grad[base + static_cast<size_t>(p)];
            bias->grad[static_cast<size_t>(j)] += s;
          }
      }
    });
  }
  return out;
}

// per-pixel smooth L1: 4x^2 below |x| = 0.25, |x| above; continuous at the knee
template <typename T>
Var<T> smooth_l1(Tape<T>& tape, const Var<T>& x) {
  return detail::unary_map(
      tape, x,
      [](T v) { return std::abs(v) < T(0.25) ? T(4) * v * v : std::abs(v); },
      [](T v, T) {
        if (std::abs(v) < T(0.25)) return T(8) * v;
        return v > T(0) ? T(1) : T(-1);
      });
}

}  // namespace ipseg
