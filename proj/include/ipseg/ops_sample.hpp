#pragma once

#include <cmath>

#include "ipseg/tape.hpp"

namespace ipseg {

// Bilinear sampling of NCHW input at per-pixel source coordinates.
// grid is (N, Ho, Wo, 2) holding (x, y) in input pixel units; taps that
// fall outside the input contribute zero, so content fades linearly to
// nothing across the border. Differentiable in both input and grid.
template <typename T>
Var<T> grid_sample_bilinear(Tape<T>& tape, const Var<T>& x, const Var<T>& grid) {
  expect_nchw(x, "grid_sample_bilinear");
  IPSEG_CHECK(grid->shape.size() == 4 && grid->dim(3) == 2,
              "grid_sample_bilinear: grid must be (N,Ho,Wo,2), got " << shape_str(grid->shape));
  IPSEG_CHECK(grid->dim(0) == x->dim(0), "grid_sample_bilinear: batch dim " << grid->dim(0)
                                             << " != input batch " << x->dim(0));
  const int64_t n = x->dim(0), c = x->dim(1), h = x->dim(2), w = x->dim(3);
  const int64_t ho = grid->dim(1), wo = grid->dim(2);
  auto out = tape.node(Shape{n, c, ho, wo}, x, grid);

  auto sample_at = [&](const T* plane, int64_t yy, int64_t xx) -> T {
    return (yy >= 0 && yy < h && xx >= 0 && xx < w) ? plane[yy * w + xx] : T(0);
  };

  for (int64_t i = 0; i < n; ++i) {
    const T* g = grid->value.data() + i * ho * wo * 2;
    for (int64_t oy = 0; oy < ho; ++oy) {
      for (int64_t ox = 0; ox < wo; ++ox) {
        const T gx = g[(oy * wo + ox) * 2 + 0];
        const T gy = g[(oy * wo + ox) * 2 + 1];
        const int64_t x0 = static_cast<int64_t>(std::floor(gx));
        const int64_t y0 = static_cast<int64_t>(std::floor(gy));
        const T fx = gx - static_cast<T>(x0);
        const T fy = gy - static_cast<T>(y0);
        for (int64_t ch = 0; ch < c; ++ch) {
          const T* plane = x->value.data() + (i * c + ch) * h * w;
          const T v00 = sample_at(plane, y0, x0);
          const T v01 = sample_at(plane, y0, x0 + 1);
          const T v10 = sample_at(plane, y0 + 1, x0);
          const T v11 = sample_at(plane, y0 + 1, x0 + 1);
          out->value[((i * c + ch) * ho + oy) * wo + ox] =
              (T(1) - fy) * ((T(1) - fx) * v00 + fx * v01) + fy * ((T(1) - fx) * v10 + fx * v11);
        }
      }
    }
  }

  if (out->needs_grad) {
    tape.record([out, x, grid, n, c, h, w, ho, wo] {
      auto in_range = [&](int64_t yy, int64_t xx) { return yy >= 0 && yy < h && xx >= 0 && xx < w; };
      for (int64_t i = 0; i < n; ++i) {
        const T* g = grid->value.data() + i * ho * wo * 2;
        for (int64_t oy = 0; oy < ho; ++oy) {
          for (int64_t ox = 0; ox < wo; ++ox) {
            const T gx = g[(oy * wo + ox) * 2 + 0];
            const T gy = g[(oy * wo + ox) * 2 + 1];
            const int64_t x0 = static_cast<int64_t>(std::floor(gx));
            const int64_t y0 = static_cast<int64_t>(std::floor(gy));
            const T fx = gx - static_cast<T>(x0);
            const T fy = gy - static_cast<T>(y0);
            T dgx = T(0), dgy = T(0);
            for (int64_t ch = 0; ch < c; ++ch) {
              const T dy = out->grad[((i * c + ch) * ho + oy) * wo + ox];
              if (dy == T(0) && !grid->needs_grad) continue;
              const T* plane = x->value.data() + (i * c + ch) * h * w;
              T* gplane = x->needs_grad ? x->grad.data() + (i * c + ch) * h * w : nullptr;
              const T v00 = in_range(y0, x0) ? plane[y0 * w + x0] : T(0);
              const T v01 = in_range(y0, x0 + 1) ? plane[y0 * w + x0 + 1] : T(0);
              const T v10 = in_range(y0 + 1, x0) ? plane[(y0 + 1) * w + x0] : T(0);
              const T v11 = in_range(y0 + 1, x0 + 1) ? plane[(y0 + 1) * w + x0 + 1] : T(0);
              if (gplane) {
                if (in_range(y0, x0)) gplane[y0 * w + x0] += dy * (T(1) - fy) * (T(1) - fx);
                if (in_range(y0, x0 + 1)) gplane[y0 * w + x0 + 1] += dy * (T(1) - fy) * fx;
                if (in_range(y0 + 1, x0)) gplane[(y0 + 1) * w + x0] += dy * fy * (T(1) - fx);
                if (in_range(y0 + 1, x0 + 1)) gplane[(y0 + 1) * w + x0 + 1] += dy * fy * fx;
              }
              dgx += dy * ((T(1) - fy) * (v01 - v00) + fy * (v11 - v10));
              dgy += dy * ((T(1) - fx) * (v10 - v00) + fx * (v11 - v01));
            }
            if (grid->needs_grad) {
              grid->grad[(i * ho * wo + oy * wo + ox) * 2 + 0] += dgx;
              grid->grad[(i * ho * wo + oy * wo + ox) * 2 + 1] += dgy;
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace ipseg
