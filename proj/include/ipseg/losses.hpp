#pragma once

#include <cmath>
#include <vector>

#include "ipseg/ops_elementwise.hpp"
#include "ipseg/ops_reduce.hpp"

namespace ipseg {

template <typename T>
struct LossWeights {
  T lambda = T(1000);     // mask area weight
  T area_target = T(0.25);  // target mean coverage a
  T beta = T(0);          // information term weight
  T log_eps = T(1e-6);    // clamp for the log terms

  void validate() const {
    IPSEG_CHECK(lambda >= T(0), "loss weights: lambda must be >= 0, got " << lambda);
    IPSEG_CHECK(area_target > T(0) && area_target < T(1),
                "loss weights: area target must lie in (0,1), got " << area_target);
    IPSEG_CHECK(beta >= T(0), "loss weights: beta must be >= 0, got " << beta);
    IPSEG_CHECK(log_eps > T(0) && log_eps <= T(1e-3),
                "loss weights: log clamp must lie in (0, 1e-3], got " << log_eps);
  }
};

// Per-step scalar summary written to the metrics trace.
struct LossReport {
  double loss_d = 0;
  double loss_g_adv = 0;
  double area_penalty = 0;
  double info_term = 0;
  double total_g = 0;

  bool finite() const {
    return std::isfinite(loss_d) && std::isfinite(loss_g_adv) && std::isfinite(area_penalty) &&
           std::isfinite(info_term) && std::isfinite(total_g);
  }
};

// Discriminator objective, minimized: -[log D(x) + log(1 - D(x_g))].
// Scores may be batched; the expectation is the batch mean.
template <typename T>
Var<T> discriminator_loss(Tape<T>& tape, const Var<T>& d_real, const Var<T>& d_fake, T eps) {
  auto real_term = mean_all(tape, log_op(tape, clamp(tape, d_real, eps, T(1) - eps)));
  auto fake_term =
      mean_all(tape, log_op(tape, clamp(tape, one_minus(tape, d_fake), eps, T(1) - eps)));
  return scale(tape, add(tape, real_term, fake_term), T(-1));
}

// Non-saturating generator term, minimized: -log D(x_g).
template <typename T>
Var<T> generator_adv_loss(Tape<T>& tape, const Var<T>& d_fake, T eps) {
  return scale(tape, mean_all(tape, log_op(tape, clamp(tape, d_fake, eps, T(1) - eps))), T(-1));
}

// L_area: mean over the batch of (1/N) sum_i (|m_i|_1 / A - a)^2, computed
// on provider-output masks before any warp.
template <typename T>
Var<T> mask_area_penalty(Tape<T>& tape, const std::vector<Var<T>>& masks, T area_target) {
  IPSEG_CHECK(!masks.empty(), "mask_area_penalty: empty mask list");
  Var<T> acc;
  for (const auto& m : masks) {
    // mean(|m|) over all non-batch dims equals |m|_1 / A per sample
    auto frac = per_sample_mean(tape, abs_op(tape, m));
    auto dev = square(tape, add_scalar(tape, frac, -area_target));
    acc = acc ? add(tape, acc, dev) : dev;
  }
  return mean_all(tape, scale(tape, acc, T(1) / static_cast<T>(masks.size())));
}

// InfoGAN-style regularizer: mean squared error between the head's
// prediction and the latent that generated the instance.
template <typename T>
Var<T> info_regularizer(Tape<T>& tape, const Var<T>& q_pred, const Var<T>& z) {
  IPSEG_CHECK(same_shape(q_pred->shape, z->shape),
              "info_regularizer: prediction " << shape_str(q_pred->shape) << " vs latent "
                                              << shape_str(z->shape));
  return mean_all(tape, square(tape, sub(tape, q_pred, z)));
}

// adv + lambda * area (+ beta * info)
template <typename T>
Var<T> total_generator_loss(Tape<T>& tape, const Var<T>& adv, const Var<T>& area,
                            const Var<T>& info, const LossWeights<T>& w) {
  auto total = add(tape, adv, scale(tape, area, w.lambda));
  if (info && w.beta != T(0)) total = add(tape, total, scale(tape, info, w.beta));
  return total;
}

}  // namespace ipseg
