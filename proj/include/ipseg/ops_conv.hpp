#pragma once

#include <vector>

#include "ipseg/blas.hpp"
#include "ipseg/tape.hpp"

namespace ipseg {

// Per-side spatial padding. Stride-1 4x4 "same" rows need the asymmetric
// split (1 before, 2 after); symmetric pads cover everything else.
struct Pad2d {
  int top = 0, bottom = 0, left = 0, right = 0;
  static Pad2d sym(int p) { return {p, p, p, p}; }
  // total = k - 1 split TF-style: floor before, remainder after
  static Pad2d same(int k) { return {(k - 1) / 2, k - (k - 1) / 2 - 1, (k - 1) / 2, k - (k - 1) / 2 - 1}; }
};

namespace detail {

inline int64_t conv_out_extent(int64_t in, int pad_lo, int pad_hi, int k, int stride) {
  return (in + pad_lo + pad_hi - k) / stride + 1;
}

// cols is (C*Kh*Kw) x (Ho*Wo), row-major; out-of-image taps are zero
template <typename T>
void im2col(const T* im, int64_t c_in, int64_t h, int64_t w, int kh, int kw, int stride,
            int pad_t, int pad_l, int64_t ho, int64_t wo, T* cols) {
  for (int64_t c = 0; c < c_in; ++c) {
    const T* imc = im + c * h * w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        T* row = cols + ((c * kh + ky) * kw + kx) * ho * wo;
        for (int64_t oy = 0; oy < ho; ++oy) {
          const int64_t y = oy * stride - pad_t + ky;
          if (y < 0 || y >= h) {
            for (int64_t ox = 0; ox < wo; ++ox) row[oy * wo + ox] = T(0);
            continue;
          }
          const T* imrow = imc + y * w;
          for (int64_t ox = 0; ox < wo; ++ox) {
            const int64_t x = ox * stride - pad_l + kx;
            row[oy * wo + ox] = (x >= 0 && x < w) ? imrow[x] : T(0);
          }
        }
      }
    }
  }
}

// adjoint of im2col: scatter-add columns back into the image
template <typename T>
void col2im(const T* cols, int64_t c_in, int64_t h, int64_t w, int kh, int kw, int stride,
            int pad_t, int pad_l, int64_t ho, int64_t wo, T* im) {
  for (int64_t c = 0; c < c_in; ++c) {
    T* imc = im + c * h * w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const T* row = cols + ((c * kh + ky) * kw + kx) * ho * wo;
        for (int64_t oy = 0; oy < ho; ++oy) {
          const int64_t y = oy * stride - pad_t + ky;
          if (y < 0 || y >= h) continue;
          T* imrow = imc + y * w;
          for (int64_t ox = 0; ox < wo; ++ox) {
            const int64_t x = ox * stride - pad_l + kx;
            if (x >= 0 && x < w) imrow[x] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// 2D convolution, input NCHW, kernel (out, in, kh, kw).
template <typename T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& x, const Var<T>& w, int stride, Pad2d pad) {
  expect_nchw(x, "conv2d input");
  IPSEG_CHECK(w->shape.size() == 4, "conv2d: kernel must be (out,in,kh,kw), got " << shape_str(w->shape));
  IPSEG_CHECK(stride >= 1, "conv2d: stride must be positive, got " << stride);
  const int64_t n = x->dim(0), c_in = x->dim(1), h = x->dim(2), wd = x->dim(3);
  const int64_t c_out = w->dim(0);
  const int kh = static_cast<int>(w->dim(2)), kw = static_cast<int>(w->dim(3));
  IPSEG_CHECK(w->dim(1) == c_in, "conv2d: input channel dim " << c_in << " != kernel In dim " << w->dim(1));
  const int64_t ho = detail::conv_out_extent(h, pad.top, pad.bottom, kh, stride);
  const int64_t wo = detail::conv_out_extent(wd, pad.left, pad.right, kw, stride);
  IPSEG_CHECK(ho >= 1 && wo >= 1, "conv2d: padded spatial dims " << h + pad.top + pad.bottom << "x"
                                      << wd + pad.left + pad.right << " smaller than kernel " << kh << "x" << kw);

  auto out = tape.node(Shape{n, c_out, ho, wo}, x, w);
  const int64_t ckk = c_in * kh * kw;
  const int64_t p = ho * wo;
  std::vector<T> cols(static_cast<size_t>(ckk * p));
  for (int64_t i = 0; i < n; ++i) {
    detail::im2col(x->value.data() + i * c_in * h * wd, c_in, h, wd, kh, kw, stride, pad.top,
                   pad.left, ho, wo, cols.data());
    // (c_out x ckk) * (ckk x p)
    gemm<T>(false, false, static_cast<int>(c_out), static_cast<int>(p), static_cast<int>(ckk),
            T(1), w->value.data(), static_cast<int>(ckk), cols.data(), static_cast<int>(p), T(0),
            out->value.data() + i * c_out * p, static_cast<int>(p));
  }

  if (out->needs_grad) {
    const int s = stride;
    const Pad2d pd = pad;
    tape.record([out, x, w, s, pd, n, c_in, h, wd, c_out, kh, kw, ho, wo, ckk, p] {
      std::vector<T> buf(static_cast<size_t>(ckk * p));
      for (int64_t i = 0; i < n; ++i) {
        const T* dy = out->grad.data() + i * c_out * p;
        if (x->needs_grad) {
          // dcols = W^T * dY, scattered back onto the input
          gemm<T>(true, false, static_cast<int>(ckk), static_cast<int>(p), static_cast<int>(c_out),
                  T(1), w->value.data(), static_cast<int>(ckk), dy, static_cast<int>(p), T(0),
                  buf.data(), static_cast<int>(p));
          detail::col2im(buf.data(), c_in, h, wd, kh, kw, s, pd.top, pd.left, ho, wo,
                         x->grad.data() + i * c_in * h * wd);
        }
        if (w->needs_grad) {
          // dW += dY * cols^T; columns recomputed rather than cached
          detail::im2col(x->value.data() + i * c_in * h * wd, c_in, h, wd, kh, kw, s, pd.top,
                         pd.left, ho, wo, buf.data());
          gemm<T>(false, true, static_cast<int>(c_out), static_cast<int>(ckk), static_cast<int>(p),
                  T(1), dy, static_cast<int>(p), buf.data(), static_cast<int>(p), T(1),
                  w->grad.data(), static_cast<int>(ckk));
        }
      }
    });
  }
  return out;
}

template <typename T>
Var<T> conv2d(Tape<T>& tape, const Var<T>& x, const Var<T>& w, int stride, int padding) {
  IPSEG_CHECK(padding >= 0, "conv2d: padding must be nonnegative, got " << padding);
  return conv2d(tape, x, w, stride, Pad2d::sym(padding));
}

// Transposed convolution (adjoint of conv2d in its input), input NCHW,
// kernel (in, out, kh, kw). conv2d's input-gradient equals this forward
// with the identical kernel.
template <typename T>
Var<T> conv2d_transpose(Tape<T>& tape, const Var<T>& x, const Var<T>& w, int stride, Pad2d pad) {
  expect_nchw(x, "conv2d_transpose input");
  IPSEG_CHECK(w->shape.size() == 4,
              "conv2d_transpose: kernel must be (in,out,kh,kw), got " << shape_str(w->shape));
  IPSEG_CHECK(stride >= 1, "conv2d_transpose: stride must be positive, got " << stride);
  const int64_t n = x->dim(0), c_in = x->dim(1), h = x->dim(2), wd = x->dim(3);
  IPSEG_CHECK(w->dim(0) == c_in,
              "conv2d_transpose: input channel dim " << c_in << " != kernel In dim " << w->dim(0));
  const int64_t c_out = w->dim(1);
  const int kh = static_cast<int>(w->dim(2)), kw = static_cast<int>(w->dim(3));
  const int64_t ho = (h - 1) * stride + kh - pad.top - pad.bottom;
  const int64_t wo = (wd - 1) * stride + kw - pad.left - pad.right;
  IPSEG_CHECK(ho >= 1 && wo >= 1, "conv2d_transpose: output extent " << ho << "x" << wo << " invalid");

  auto out = tape.node(Shape{n, c_out, ho, wo}, x, w);
  const int64_t ckk = c_out * kh * kw;
  const int64_t p = h * wd;  // columns live on the input grid
  std::vector<T> cols(static_cast<size_t>(ckk * p));
  for (int64_t i = 0; i < n; ++i) {
    // cols = W^T * x, then scatter onto the (larger) output image
    gemm<T>(true, false, static_cast<int>(ckk), static_cast<int>(p), static_cast<int>(c_in), T(1),
            w->value.data(), static_cast<int>(ckk), x->value.data() + i * c_in * p,
            static_cast<int>(p), T(0), cols.data(), static_cast<int>(p));
    detail::col2im(cols.data(), c_out, ho, wo, kh, kw, stride, pad.top, pad.left, h, wd,
                   out->value.data() + i * c_out * ho * wo);
  }

  if (out->needs_grad) {
    const int s = stride;
    const Pad2d pd = pad;
    tape.record([out, x, w, s, pd, n, c_in, h, wd, c_out, kh, kw, ho, wo, ckk, p] {
      std::vector<T> buf(static_cast<size_t>(ckk * p));
      for (int64_t i = 0; i < n; ++i) {
        // gather the output-gradient into columns on the input grid
        detail::im2col(out->grad.data() + i * c_out * ho * wo, c_out, ho, wo, kh, kw, s, pd.top,
                       pd.left, h, wd, buf.data());
        if (x->needs_grad) {
          gemm<T>(false, false, static_cast<int>(c_in), static_cast<int>(p),
                  static_cast<int>(ckk), T(1), w->value.data(), static_cast<int>(ckk), buf.data(),
                  static_cast<int>(p), T(1), x->grad.data() + i * c_in * p, static_cast<int>(p));
        }
        if (w->needs_grad) {
          gemm<T>(false, true, static_cast<int>(c_in), static_cast<int>(ckk), static_cast<int>(p),
                  T(1), x->value.data() + i * c_in * p, static_cast<int>(p), buf.data(),
                  static_cast<int>(p), T(1), w->grad.data(), static_cast<int>(ckk));
        }
      }
    });
  }
  return out;
}

template <typename T>
Var<T> conv2d_transpose(Tape<T>& tape, const Var<T>& x, const Var<T>& w, int stride, int padding) {
  IPSEG_CHECK(padding >= 0, "conv2d_transpose: padding must be nonnegative, got " << padding);
  return conv2d_transpose(tape, x, w, stride, Pad2d::sym(padding));
}

}  // namespace ipseg
