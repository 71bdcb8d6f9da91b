#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "ipseg/ops_sample.hpp"
#include "ipseg/ops_shape.hpp"
#include "ipseg/tape.hpp"

namespace ipseg {

// One instance layer: RGB appearance plus soft alpha mask, both in [0,1].
// Batched NCHW: appearance (N,3,H,W), mask (N,1,H,W).
template <typename T>
struct RgbaLayer {
  Var<T> appearance;
  Var<T> mask;

  int64_t batch() const { return appearance->dim(0); }
  int64_t height() const { return appearance->dim(2); }
  int64_t width() const { return appearance->dim(3); }
};

template <typename T>
void expect_rgba(const RgbaLayer<T>& l, const char* who) {
  expect_nchw(l.appearance, who);
  expect_nchw(l.mask, who);
  IPSEG_CHECK(l.appearance->dim(1) == 3, who << ": appearance needs 3 channels, got " << l.appearance->dim(1));
  IPSEG_CHECK(l.mask->dim(1) == 1, who << ": mask needs 1 channel, got " << l.mask->dim(1));
  IPSEG_CHECK(l.appearance->dim(0) == l.mask->dim(0) && l.appearance->dim(2) == l.mask->dim(2) &&
                  l.appearance->dim(3) == l.mask->dim(3),
              who << ": appearance " << shape_str(l.appearance->shape) << " and mask "
                  << shape_str(l.mask->shape) << " disagree");
}

// Pose correction for one layer: integer pixel translation (exact index
// shift) or a 2x3 affine map in normalized [-1,1] coordinates.
template <typename T>
struct WarpParams {
  enum class Kind { translation, affine };
  Kind kind = Kind::translation;
  int dx = 0, dy = 0;
  std::array<T, 6> affine{T(1), T(0), T(0), T(0), T(1), T(0)};

  static WarpParams identity() { return {}; }
  bool is_identity() const {
    if (kind == Kind::translation) return dx == 0 && dy == 0;
    return affine == std::array<T, 6>{T(1), T(0), T(0), T(0), T(1), T(0)};
  }
  bool finite() const {
    if (kind == Kind::translation) return true;
    for (T a : affine)
      if (!std::isfinite(static_cast<double>(a))) return false;
    return true;
  }
};

// Sampling grid for an affine map in normalized coordinates: the source
// location for output pixel (x,y) is A * (xn, yn, 1), mapped back to pixels.
template <typename T>
Var<T> affine_grid(Tape<T>& tape, const std::array<T, 6>& a, int64_t n, int64_t h, int64_t w) {
  auto grid = make_leaf<T>({n, h, w, 2});
  const T sx = w > 1 ? T(2) / static_cast<T>(w - 1) : T(0);
  const T sy = h > 1 ? T(2) / static_cast<T>(h - 1) : T(0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        const T xn = static_cast<T>(x) * sx - T(1);
        const T yn = static_cast<T>(y) * sy - T(1);
        const T xs = a[0] * xn + a[1] * yn + a[2];
        const T ys = a[3] * xn + a[4] * yn + a[5];
        T* g = grid->value.data() + ((i * h + y) * w + x) * 2;
        g[0] = (xs + T(1)) * static_cast<T>(w - 1) / T(2);
        g[1] = (ys + T(1)) * static_cast<T>(h - 1) / T(2);
      }
  (void)tape;
  return grid;
}

// Identical warp applied to appearance and mask (the parameters are shared
// among RGBA channels). Integer translations are exact index shifts;
// affine maps go through the bilinear sampler. Zero fill outside.
template <typename T>
RgbaLayer<T> warp_layer(Tape<T>& tape, const RgbaLayer<T>& layer, const WarpParams<T>& params) {
  expect_rgba(layer, "warp_layer");
  IPSEG_CHECK(params.finite(), "warp_layer: non-finite affine parameters");
  if (params.kind == WarpParams<T>::Kind::translation) {
    if (params.dx == 0 && params.dy == 0) return layer;
    return {shift2d(tape, layer.appearance, params.dx, params.dy),
            shift2d(tape, layer.mask, params.dx, params.dy)};
  }
  auto grid = affine_grid(tape, params.affine, layer.batch(), layer.height(), layer.width());
  return {grid_sample_bilinear(tape, layer.appearance, grid),
          grid_sample_bilinear(tape, layer.mask, grid)};
}

// Ordered stack, index i = stacking order (later entries render on top),
// over a base image that defaults to pure black.
template <typename T>
struct LayerStack {
  Var<T> base;  // (N,3,H,W)
  std::vector<RgbaLayer<T>> layers;

  static LayerStack black(int64_t n, int64_t h, int64_t w) {
    LayerStack s;
    s.base = make_leaf<T>({n, 3, h, w});
    return s;
  }
};

// One alpha-blending step, out = I (*) m + prev (*) (1 - m), with the
// single-channel mask broadcast over RGB. Fused so each blend costs one
// tape node.
template <typename T>
Var<T> alpha_blend(Tape<T>& tape, const Var<T>& prev, const Var<T>& appearance, const Var<T>& mask) {
  IPSEG_CHECK(same_shape(prev->shape, appearance->shape),
              "alpha_blend: image " << shape_str(prev->shape) << " vs appearance "
                                    << shape_str(appearance->shape));
  const int64_t n = prev->dim(0), c = prev->dim(1), hw = prev->dim(2) * prev->dim(3);
  IPSEG_CHECK(mask->dim(0) == n && mask->dim(1) == 1 && mask->numel() == n * hw,
              "alpha_blend: mask " << shape_str(mask->shape) << " does not match image "
                                   << shape_str(prev->shape));
  auto out = tape.node(prev->shape, prev, appearance, mask);
  for (int64_t i = 0; i < n; ++i) {
    const T* m = mask->value.data() + i * hw;
    for (int64_t ch = 0; ch < c; ++ch) {
      const T* a = appearance->value.data() + (i * c + ch) * hw;
      const T* p = prev->value.data() + (i * c + ch) * hw;
      T* o = out->value.data() + (i * c + ch) * hw;
      for (int64_t k = 0; k < hw; ++k) o[k] = a[k] * m[k] + p[k] * (T(1) - m[k]);
    }
  }
  if (out->needs_grad) {
    tape.record([out, prev, appearance, mask, n, c, hw] {
      for (int64_t i = 0; i < n; ++i) {
        const T* m = mask->value.data() + i * hw;
        T* dm = mask->needs_grad ? mask->grad.data() + i * hw : nullptr;
        for (int64_t ch = 0; ch < c; ++ch) {
          const T* dy = out->grad.data() + (i * c + ch) * hw;
          const T* a = appearance->value.data() + (i * c + ch) * hw;
          const T* p = prev->value.data() + (i * c + ch) * hw;
          if (appearance->needs_grad) {
            T* da = appearance->grad.data() + (i * c + ch) * hw;
            for (int64_t k = 0; k < hw; ++k) da[k] += dy[k] * m[k];
          }
          if (prev->needs_grad) {
            T* dp = prev->grad.data() + (i * c + ch) * hw;
            for (int64_t k = 0; k < hw; ++k) dp[k] += dy[k] * (T(1) - m[k]);
          }
          if (dm)
            for (int64_t k = 0; k < hw; ++k) dm[k] += dy[k] * (a[k] - p[k]);
        }
      }
    });
  }
  return out;
}

// Recursive alpha blending of the whole stack, bottom to top. An empty
// stack returns the base image.
template <typename T>
Var<T> composite(Tape<T>& tape, const LayerStack<T>& stack) {
  IPSEG_CHECK(stack.base, "composite: stack has no base image");
  expect_nchw(stack.base, "composite base");
  Var<T> x = stack.base;
  for (const auto& layer : stack.layers) {
    expect_rgba(layer, "composite layer");
    x = alpha_blend(tape, x, layer.appearance, layer.mask);
  }
  return x;
}

// Carved foreground over an opaque background: the two-layer special case
// where the background mask covers every pixel.
template <typename T>
Var<T> paste_foreground(Tape<T>& tape, const RgbaLayer<T>& fg, const Var<T>& bg) {
  expect_rgba(fg, "paste_foreground");
  IPSEG_CHECK(same_shape(fg.appearance->shape, bg->shape),
              "paste_foreground: foreground " << shape_str(fg.appearance->shape)
                                              << " vs background " << shape_str(bg->shape));
  return alpha_blend(tape, bg, fg.appearance, fg.mask);
}

}  // namespace ipseg
