#pragma once

#include <cmath>
#include <vector>

#include "ipseg/tape.hpp"

namespace ipseg {

template <typename T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;

  explicit BatchNormState(int64_t channels = 0)
      : running_mean(static_cast<size_t>(channels), T(0)),
        running_var(static_cast<size_t>(channels), T(1)) {}
};

// Batch normalization over NCHW with per-channel affine. Train mode uses
// batch statistics (biased variance) and updates the running averages;
// eval mode normalizes with the running averages.
template <typename T>
Var<T> batch_norm(Tape<T>& tape, const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  BatchNormState<T>& state, bool train, T eps = T(1e-5), T momentum = T(0.9)) {
  expect_nchw(x, "batch_norm");
  const int64_t n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
  IPSEG_CHECK(gamma->numel() == c && beta->numel() == c,
              "batch_norm: gamma/beta length must equal channel dim " << c << ", got "
                  << gamma->numel() << "/" << beta->numel());
  IPSEG_CHECK(static_cast<int64_t>(state.running_mean.size()) == c,
              "batch_norm: state has " << state.running_mean.size() << " channels, input has " << c);

  const int64_t hw = h * w;
  const int64_t m = n * hw;  // reduction size per channel
  auto out = tape.node(x->shape, x, gamma, beta);

  std::vector<T> mean(static_cast<size_t>(c)), inv_std(static_cast<size_t>(c));
  for (int64_t j = 0; j < c; ++j) {
    T mu, var;
    if (train) {
      T s = T(0);
      for (int64_t i = 0; i < n; ++i) {
        const T* p = x->value.data() + (i * c + j) * hw;
        for (int64_t k = 0; k < hw; ++k) s += p[k];
      }
      mu = s / static_cast<T>(m);
      T sq = T(0);
      for (int64_t i = 0; i < n; ++i) {
        const T* p = x->value.data() + (i * c + j) * hw;
        for (int64_t k = 0; k < hw; ++k) {
          const T d = p[k] - mu;
          sq += d * d;
        }
      }
      var = sq / static_cast<T>(m);
      state.running_mean[j] = momentum * state.running_mean[j] + (T(1) - momentum) * mu;
      state.running_var[j] = momentum * state.running_var[j] + (T(1) - momentum) * var;
    } else {
      mu = state.running_mean[j];
      var = state.running_var[j];
    }
    mean[j] = mu;
    inv_std[j] = T(1) / std::sqrt(var + eps);
    const T g = gamma->value[j], b = beta->value[j], istd = inv_std[j];
    for (int64_t i = 0; i < n; ++i) {
      const T* p = x->value.data() + (i * c + j) * hw;
      T* q = out->value.data() + (i * c + j) * hw;
      for (int64_t k = 0; k < hw; ++k) q[k] = g * (p[k] - mu) * istd + b;
    }
  }

  if (out->needs_grad) {
    tape.record([out, x, gamma, beta, mean, inv_std, train, n, c, hw, m] {
      for (int64_t j = 0; j < c; ++j) {
        const T mu = mean[j], istd = inv_std[j], g = gamma->value[j];
        T sum_dy = T(0), sum_dy_xhat = T(0);
        for (int64_t i = 0; i < n; ++i) {
          const T* dy = out->grad.data() + (i * c + j) * hw;
          const T* p = x->value.data() + (i * c + j) * hw;
          for (int64_t k = 0; k < hw; ++k) {
            sum_dy += dy[k];
            sum_dy_xhat += dy[k] * (p[k] - mu) * istd;
          }
        }
        if (gamma->needs_grad) gamma->grad[j] += sum_dy_xhat;
        if (beta->needs_grad) beta->grad[j] += sum_dy;
        if (x->needs_grad) {
          const T inv_m = T(1) / static_cast<T>(m);
          for (int64_t i = 0; i < n; ++i) {
            const T* dy = out->grad.data() + (i * c + j) * hw;
            const T* p = x->value.data() + (i * c + j) * hw;
            T* dx = x->grad.data() + (i * c + j) * hw;
            for (int64_t k = 0; k < hw; ++k) {
              if (train) {
                const T xhat = (p[k] - mu) * istd;
                dx[k] += g * istd * (dy[k] - inv_m * sum_dy - xhat * inv_m * sum_dy_xhat);
              } else {
                dx[k] += g * istd * dy[k];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
struct SpectralState {
  std::vector<T> u;  // left singular vector estimate, persists across steps
};

namespace detail {
template <typename T>
T l2_normalize(std::vector<T>& v) {
  T s = T(0);
  for (T x : v) s += x * x;
  const T norm = std::sqrt(s);
  const T inv = T(1) / (norm + T(1e-12));
  for (T& x : v) x *= inv;
  return norm;
}
}  // namespace detail

// Weight / sigma_hat with sigma_hat from power iteration on the matrix view
// (rows = dim 0, everything else flattened). u and v are constants for the
// gradient, matching the SN-GAN treatment.
template <typename T>
Var<T> spectral_normalize(Tape<T>& tape, const Var<T>& w, SpectralState<T>& state,
                          int n_power_iter, bool update_state = true) {
  IPSEG_CHECK(n_power_iter >= 1, "spectral_normalize: need at least 1 power iteration, got " << n_power_iter);
  IPSEG_CHECK(!w->shape.empty(), "spectral_normalize: rank-0 weight");
  const int64_t rows = w->dim(0);
  const int64_t cols = w->numel() / rows;
  IPSEG_CHECK(static_cast<int64_t>(state.u.size()) == rows,
              "spectral_normalize: u state length " << state.u.size() << " != rows " << rows);

  std::vector<T> u = state.u;
  std::vector<T> v(static_cast<size_t>(cols));
  const T* wd = w->value.data();
  for (int it = 0; it < n_power_iter; ++it) {
    for (int64_t j = 0; j < cols; ++j) {
      T s = T(0);
      for (int64_t i = 0; i < rows; ++i) s += wd[i * cols + j] * u[i];
      v[j] = s;
    }
    detail::l2_normalize(v);
    for (int64_t i = 0; i < rows; ++i) {
      T s = T(0);
      const T* row = wd + i * cols;
      for (int64_t j = 0; j < cols; ++j) s += row[j] * v[j];
      u[i] = s;
    }
    detail::l2_normalize(u);
  }
  T sigma = T(0);
  for (int64_t i = 0; i < rows; ++i) {
    T s = T(0);
    const T* row = wd + i * cols;
    for (int64_t j = 0; j < cols; ++j) s += row[j] * v[j];
    sigma += u[i] * s;
  }
  if (sigma < T(1e-12)) sigma = T(1e-12);  // zero-weight floor
  if (update_state) state.u = u;

  auto out = tape.node(w->shape, w);
  const T inv_sigma = T(1) / sigma;
  for (size_t i = 0; i < w->value.size(); ++i) out->value[i] = w->value[i] * inv_sigma;

  if (out->needs_grad) {
    tape.record([out, w, u = std::move(u), v = std::move(v), inv_sigma, rows, cols] {
      if (!w->needs_grad) return;
      // d(W/sigma) with sigma = u^T W v:  dW = dY/sigma - (<dY, Y>/sigma) u v^T
      T dot = T(0);
      for (size_t i = 0; i < w->value.size(); ++i) dot += out->grad[i] * out->value[i];
      const T coef = dot * inv_sigma;
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j)
          w->grad[i * cols + j] += out->grad[i * cols + j] * inv_sigma - coef * u[i] * v[j];
    });
  }
  return out;
}

}  // namespace ipseg
