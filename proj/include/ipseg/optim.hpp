#pragma once

#include <cmath>
#include <vector>

#include "ipseg/tensor.hpp"

namespace ipseg {

template <typename T>
struct AdamHyper {
  T lr;
  T beta1 = T(0.5);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

// First/second moment per parameter plus the shared step counter.
template <typename T>
struct OptState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  int64_t t = 0;

  void init(const std::vector<Var<T>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p->value.size(), T(0));
      v.emplace_back(p->value.size(), T(0));
    }
    t = 0;
  }
};

// Bias-corrected Adam update reading gradients off the parameters.
template <typename T>
void adam_step(const std::vector<Var<T>>& params, OptState<T>& state, const AdamHyper<T>& hp) {
  IPSEG_CHECK(state.m.size() == params.size(),
              "adam_step: state tracks " << state.m.size() << " params, got " << params.size());
  state.t += 1;
  const T bc1 = T(1) - std::pow(hp.beta1, static_cast<T>(state.t));
  const T bc2 = T(1) - std::pow(hp.beta2, static_cast<T>(state.t));
  for (size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    IPSEG_CHECK(state.m[k].size() == p.value.size(),
                "adam_step: moment size " << state.m[k].size() << " != param size " << p.value.size());
    p.ensure_grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (size_t i = 0; i < p.value.size(); ++i) {
      const T g = p.grad[i];
      m[i] = hp.beta1 * m[i] + (T(1) - hp.beta1) * g;
      v[i] = hp.beta2 * v[i] + (T(1) - hp.beta2) * g * g;
      const T mhat = m[i] / bc1;
      const T vhat = v[i] / bc2;
      p.value[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
  }
}

template <typename T>
void zero_grads(const std::vector<Var<T>>& params) {
  for (const auto& p : params) {
    p->ensure_grad();
    p->zero_grad();
  }
}

}  // namespace ipseg
