#pragma once

#include <cmath>

#include "ipseg/tape.hpp"

namespace ipseg {

template <typename T>
Var<T> sum_all(Tape<T>& tape, const Var<T>& x) {
  auto out = tape.node(Shape{1}, x);
  T s = T(0);
  for (T v : x->value) s += v;
  out->value[0] = s;
  if (out->needs_grad) {
    tape.record([out, x] {
      if (!x->needs_grad) return;
      const T g = out->grad[0];
      for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
    });
  }
  return out;
}

template <typename T>
Var<T> mean_all(Tape<T>& tape, const Var<T>& x) {
  auto out = tape.node(Shape{1}, x);
  T s = T(0);
  for (T v : x->value) s += v;
  const T inv = T(1) / static_cast<T>(x->value.size());
  out->value[0] = s * inv;
  if (out->needs_grad) {
    tape.record([out, x, inv] {
      if (!x->needs_grad) return;
      const T g = out->grad[0] * inv;
      for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
    });
  }
  return out;
}

template <typename T>
Var<T> l1_norm(Tape<T>& tape, const Var<T>& x) {
  auto out = tape.node(Shape{1}, x);
  T s = T(0);
  for (T v : x->value) s += std::abs(v);
  out->value[0] = s;
  if (out->needs_grad) {
    tape.record([out, x] {
      if (!x->needs_grad) return;
      const T g = out->grad[0];
      for (size_t i = 0; i < x->grad.size(); ++i) {
        const T v = x->value[i];
        x->grad[i] += g * (v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)));
      }
    });
  }
  return out;
}

// Mean over every dim but the first: NCHW -> (N). The per-sample scalar
// score of a discriminator map and per-sample mask area both reduce this way.
template <typename T>
Var<T> per_sample_mean(Tape<T>& tape, const Var<T>& x) {
  IPSEG_CHECK(!x->shape.empty(), "per_sample_mean: rank-0 input");
  const int64_t n = x->dim(0);
  const int64_t m = x->numel() / n;
  auto out = tape.node(Shape{n}, x);
  const T inv = T(1) / static_cast<T>(m);
  for (int64_t i = 0; i < n; ++i) {
    T s = T(0);
    const size_t base = static_cast<size_t>(i * m);
    for (int64_t j = 0; j < m; ++j) s += x->value[base + static_cast<size_t>(j)];
    out->value[static_cast<size_t>(i)] = s * inv;
  }
  if (out->needs_grad) {
    tape.record([out, x, n, m, inv] {
      if (!x->needs_grad) return;
      for (int64_t i = 0; i < n; ++i) {
        const T g = out->grad[static_cast<size_t>(i)] * inv;
        const size_t base = static_cast<size_t>(i * m);
        for (int64_t j = 0; j < m; ++j) x->grad[base + static_cast<size_t>(j)] += g;
      }
    });
  }
  return out;
}

}  // namespace ipseg
