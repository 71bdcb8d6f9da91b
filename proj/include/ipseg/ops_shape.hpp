#pragma once

#include "ipseg/tape.hpp"

namespace ipseg {

template <typename T>
Var<T> reshape(Tape<T>& tape, const Var<T>& x, Shape shape) {
  IPSEG_CHECK(numel(shape) == x->numel(),
              "reshape: cannot view " << shape_str(x->shape) << " as " << shape_str(shape));
  auto out = tape.node(std::move(shape), x);
  out->value = x->value;
  if (out->needs_grad) {
    tape.record([out, x] {
      if (x->needs_grad) accumulate(x->grad, out->grad);
    });
  }
  return out;
}

// concat along the channel dim of NCHW
template <typename T>
Var<T> concat_channels(Tape<T>& tape, const Var<T>& a, const Var<T>& b) {
  expect_nchw(a, "concat_channels");
  expect_nchw(b, "concat_channels");
  IPSEG_CHECK(a->dim(0) == b->dim(0) && a->dim(2) == b->dim(2) && a->dim(3) == b->dim(3),
              "concat_channels: incompatible " << shape_str(a->shape) << " vs " << shape_str(b->shape));
  const int64_t n = a->dim(0), ca = a->dim(1), cb = b->dim(1), hw = a->dim(2) * a->dim(3);
  auto out = tape.node(Shape{n, ca + cb, a->dim(2), a->dim(3)}, a, b);
  for (int64_t i = 0; i < n; ++i) {
    std::copy_n(a->value.begin() + i * ca * hw, ca * hw, out->value.begin() + i * (ca + cb) * hw);
    std::copy_n(b->value.begin() + i * cb * hw, cb * hw,
                out->value.begin() + i * (ca + cb) * hw + ca * hw);
  }
  if (out->needs_grad) {
    tape.record([out, a, b, n, ca, cb, hw] {
      for (int64_t i = 0; i < n; ++i) {
        const T* g = out->grad.data() + i * (ca + cb) * hw;
        if (a->needs_grad) {
          T* ga = a->grad.data() + i * ca * hw;
          for (int64_t j = 0; j < ca * hw; ++j) ga[j] += g[j];
        }
        if (b->needs_grad) {
          T* gb = b->grad.data() + i * cb * hw;
          for (int64_t j = 0; j < cb * hw; ++j) gb[j] += g[ca * hw + j];
        }
      }
    });
  }
  return out;
}

// integer translation with zero fill; content moves by (+dx right, +dy down)
template <typename T>
Var<T> shift2d(Tape<T>& tape, const Var<T>& x, int dx, int dy) {
  expect_nchw(x, "shift2d");
  const int64_t n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
  auto out = tape.node(x->shape, x);
  for (int64_t i = 0; i < n * c; ++i) {
    const T* src = x->value.data() + i * h * w;
    T* dst = out->value.data() + i * h * w;
    for (int64_t y = 0; y < h; ++y) {
      const int64_t sy = y - dy;
      for (int64_t xx = 0; xx < w; ++xx) {
        const int64_t sx = xx - dx;
        dst[y * w + xx] =
            (sy >= 0 && sy < h && sx >= 0 && sx < w) ? src[sy * w + sx] : T(0);
      }
    }
  }
  if (out->needs_grad) {
    tape.record([out, x, dx, dy, n, c, h, w] {
      if (!x->needs_grad) return;
      for (int64_t i = 0; i < n * c; ++i) {
        const T* g = out->grad.data() + i * h * w;
        T* gx = x->grad.data() + i * h * w;
        for (int64_t y = 0; y < h; ++y) {
          const int64_t sy = y - dy;
          if (sy < 0 || sy >= h) continue;
          for (int64_t xx = 0; xx < w; ++xx) {
            const int64_t sx = xx - dx;
            if (sx >= 0 && sx < w) gx[sy * w + sx] += g[y * w + xx];
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Var<T> flip_horizontal(Tape<T>& tape, const Var<T>& x) {
  expect_nchw(x, "flip_horizontal");
  const int64_t n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
  auto out = tape.node(x->shape, x);
  for (int64_t i = 0; i < n * c * h; ++i)
    for (int64_t xx = 0; xx < w; ++xx)
      out->value[i * w + xx] = x->value[i * w + (w - 1 - xx)];
  if (out->needs_grad) {
    tape.record([out, x, n, c, h, w] {
      if (!x->needs_grad) return;
      for (int64_t i = 0; i < n * c * h; ++i)
        for (int64_t xx = 0; xx < w; ++xx)
          x->grad[i * w + (w - 1 - xx)] += out->grad[i * w + xx];
    });
  }
  return out;
}

}  // namespace ipseg
