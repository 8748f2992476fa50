#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "aqua/tensor.hpp"

// Dense NCHW kernels plus the adjoint of each differentiable one.
//
// Determinism contract: every output element is accumulated by exactly one
// thread in a fixed loop order, so results are bitwise reproducible for a
// given build regardless of the number of threads. Inner loops run over
// independent output elements, which keeps them vectorizable without
// reordering any per-element reduction.

namespace aqua::ops {

namespace detail {

inline int floor_div(int a, int b) {
  int q = a / b, r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}
inline int ceil_div(int a, int b) { return -floor_div(-a, b); }

inline void check(bool ok, const char* msg) {
  if (!ok) throw ContractError(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution. Cross-correlation convention: no kernel flip. Zero padding.
// weight shape (c_out, c_in, k, k) stored as Tensor{n=c_out, c=c_in, h=k, w=k};
// bias shape (c_out, 1, 1, 1).

inline Shape conv2d_out_shape(const Shape& x, const Shape& w, int stride, int pad) {
  const int k = w.h;
  detail::check(w.h == w.w, "conv2d: kernel must be square");
  detail::check(k % 2 == 1, "conv2d: kernel size must be odd");
  detail::check(stride >= 1, "conv2d: stride must be >= 1");
  detail::check(pad >= 0, "conv2d: padding must be >= 0");
  if (x.c != w.c) {
    throw ContractError("conv2d: input has " + std::to_string(x.c) +
                        " channels but weight expects " + std::to_string(w.c));
  }
  const int ho = (x.h + 2 * pad - k) / stride + 1;
  const int wo = (x.w + 2 * pad - k) / stride + 1;
  detail::check(ho >= 1 && wo >= 1, "conv2d: kernel larger than padded input");
  return Shape{x.n, w.n, ho, wo};
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 int stride = 1, int pad = 0) {
  const Shape xs = x.shape(), ws = w.shape();
  const Shape ys = conv2d_out_shape(xs, ws, stride, pad);
  detail::check(b.numel() == ws.n, "conv2d: bias length must equal c_out");
  const int k = ws.h, ho = ys.h, wo = ys.w;
  Tensor<T> y(ys);

  const std::int64_t planes = static_cast<std::int64_t>(xs.n) * ws.n;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const int in = static_cast<int>(p / ws.n);
    const int co = static_cast<int>(p % ws.n);
    T* yp = y.plane(in, co);
    const T bias = b[co];
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(ho) * wo; ++i) yp[i] = bias;
    for (int ci = 0; ci < xs.c; ++ci) {
      const T* xp = x.plane(in, ci);
      for (int kh = 0; kh < k; ++kh) {
        const int oy0 = std::max(0, detail::ceil_div(pad - kh, stride));
        const int oy1 = std::min(ho - 1, detail::floor_div(xs.h - 1 - kh + pad, stride));
        for (int kw = 0; kw < k; ++kw) {
          const T wv = w.at(co, ci, kh, kw);
          if (wv == T(0)) continue;
          const int ox0 = std::max(0, detail::ceil_div(pad - kw, stride));
          const int ox1 = std::min(wo - 1, detail::floor_div(xs.w - 1 - kw + pad, stride));
          for (int oy = oy0; oy <= oy1; ++oy) {
            const T* xrow = xp + static_cast<std::int64_t>(oy * stride + kh - pad) * xs.w;
            T* yrow = yp + static_cast<std::int64_t>(oy) * wo;
            if (stride == 1) {
              const T* xs2 = xrow + (kw - pad);
              for (int ox = ox0; ox <= ox1; ++ox) yrow[ox] += wv * xs2[ox];
            } else {
              for (int ox = ox0; ox <= ox1; ++ox) {
                yrow[ox] += wv * xrow[ox * stride + kw - pad];
              }
            }
          }
        }
      }
    }
  }
  return y;
}

/// Accumulates d(loss)/d(input) into gx. Gather form: each input element sums
/// its contributions over (c_out, kh, kw) in a fixed order.
template <typename T>
void conv2d_backward_input(Tensor<T>& gx, const Tensor<T>& w, const Tensor<T>& gy,
                           int stride, int pad) {
  const Shape xs = gx.shape(), ws = w.shape(), ys = gy.shape();
  const int k = ws.h;
  const std::int64_t planes = static_cast<std::int64_t>(xs.n) * xs.c;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const int in = static_cast<int>(p / xs.c);
    const int ci = static_cast<int>(p % xs.c);
    T* gxp = gx.plane(in, ci);
    for (int co = 0; co < ws.n; ++co) {
      const T* gyp = gy.plane(in, co);
      for (int kh = 0; kh < k; ++kh) {
        for (int kw = 0; kw < k; ++kw) {
          const T wv = w.at(co, ci, kh, kw);
          if (wv == T(0)) continue;
          const int oy0 = std::max(0, detail::ceil_div(pad - kh, stride));
          const int oy1 = std::min(ys.h - 1, detail::floor_div(xs.h - 1 - kh + pad, stride));
          const int ox0 = std::max(0, detail::ceil_div(pad - kw, stride));
          const int ox1 = std::min(ys.w - 1, detail::floor_div(xs.w - 1 - kw + pad, stride));
          for (int oy = oy0; oy <= oy1; ++oy) {
            const T* grow = gyp + static_cast<std::int64_t>(oy) * ys.w;
            T* gxrow = gxp + static_cast<std::int64_t>(oy * stride + kh - pad) * xs.w;
            if (stride == 1) {
              T* gxs = gxrow + (kw - pad);
              for (int ox = ox0; ox <= ox1; ++ox) gxs[ox] += wv * grow[ox];
            } else {
              for (int ox = ox0; ox <= ox1; ++ox) {
                gxrow[ox * stride + kw - pad] += wv * grow[ox];
              }
            }
          }
        }
      }
    }
  }
}

/// Accumulates d(loss)/d(weight) into gw. The output gradient is transposed
/// to channel-last once, so every (kh, kw, ci) slice accumulates a full
/// c_out-vector of independent sums with a contiguous, vectorizable inner
/// axis. Each gw element still sums its terms in flat (n, oy, ox) order.
template <typename T>
void conv2d_backward_weight(Tensor<T>& gw, const Tensor<T>& x, const Tensor<T>& gy,
                            int stride, int pad) {
  const Shape xs = x.shape(), ws = gw.shape(), ys = gy.shape();
  const int k = ws.h;
  const int co_n = ws.n;

  // gyt[((n*Ho + oy)*Wo + ox)*Co + co]
  std::vector<T> gyt(static_cast<std::size_t>(gy.numel()));
  const std::int64_t hw = static_cast<std::int64_t>(ys.h) * ys.w;
#pragma omp parallel for schedule(static)
  for (std::int64_t in = 0; in < ys.n; ++in) {
    for (int co = 0; co < co_n; ++co) {
      const T* src = gy.plane(static_cast<int>(in), co);
      T* dst = gyt.data() + in * hw * co_n + co;
      for (std::int64_t i = 0; i < hw; ++i) dst[i * co_n] = src[i];
    }
  }

  const std::int64_t slices = static_cast<std::int64_t>(ws.c) * k * k;
#pragma omp parallel for schedule(static)
  for (std::int64_t slice = 0; slice < slices; ++slice) {
    const int ci = static_cast<int>(slice / (k * k));
    const int kh = static_cast<int>((slice / k) % k);
    const int kw = static_cast<int>(slice % k);
    std::vector<T> acc(static_cast<std::size_t>(co_n), T(0));
    const int oy0 = std::max(0, detail::ceil_div(pad - kh, stride));
    const int oy1 = std::min(ys.h - 1, detail::floor_div(xs.h - 1 - kh + pad, stride));
    const int ox0 = std::max(0, detail::ceil_div(pad - kw, stride));
    const int ox1 = std::min(ys.w - 1, detail::floor_div(xs.w - 1 - kw + pad, stride));
    for (int in = 0; in < xs.n; ++in) {
      const T* xp = x.plane(in, ci);
      for (int oy = oy0; oy <= oy1; ++oy) {
        const T* xrow = xp + static_cast<std::int64_t>(oy * stride + kh - pad) * xs.w;
        const T* grow = gyt.data() + ((static_cast<std::int64_t>(in) * ys.h + oy) * ys.w) * co_n;
        for (int ox = ox0; ox <= ox1; ++ox) {
          const T a = xrow[ox * stride + kw - pad];
          if (a == T(0)) continue;
          const T* g = grow + static_cast<std::int64_t>(ox) * co_n;
          T* accp = acc.data();
          for (int co = 0; co < co_n; ++co) accp[co] += a * g[co];
        }
      }
    }
    for (int co = 0; co < co_n; ++co) gw.at(co, ci, kh, kw) += acc[static_cast<std::size_t>(co)];
  }
}

template <typename T>
void conv2d_backward_bias(Tensor<T>& gb, const Tensor<T>& gy) {
  const Shape ys = gy.shape();
  for (int co = 0; co < ys.c; ++co) {
    T s = 0;
    for (int in = 0; in < ys.n; ++in) {
      const T* gyp = gy.plane(in, co);
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(ys.h) * ys.w; ++i) s += gyp[i];
    }
    gb[co] += s;
  }
}

// ---------------------------------------------------------------------------
// Depthwise convolution: one k x k filter per channel, stride 1.
// weight shape (c, 1, k, k); no bias (the pointwise stage carries it).

template <typename T>
Tensor<T> depthwise_conv(const Tensor<T>& x, const Tensor<T>& w, int pad) {
  const Shape xs = x.shape(), ws = w.shape();
  detail::check(ws.c == 1 && ws.h == ws.w && ws.h % 2 == 1, "depthwise: weight must be (c,1,k,k), k odd");
  if (ws.n != xs.c) {
    throw ContractError("depthwise: weight has " + std::to_string(ws.n) +
                        " channels but input has " + std::to_string(xs.c));
  }
  const int k = ws.h;
  const int ho = xs.h + 2 * pad - k + 1, wo = xs.w + 2 * pad - k + 1;
  detail::check(ho >= 1 && wo >= 1, "depthwise: kernel larger than padded input");
  Tensor<T> y(Shape{xs.n, xs.c, ho, wo});
  const std::int64_t planes = static_cast<std::int64_t>(xs.n) * xs.c;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const int in = static_cast<int>(p / xs.c);
    const int ci = static_cast<int>(p % xs.c);
    const T* xp = x.plane(in, ci);
    T* yp = y.plane(in, ci);
    for (int kh = 0; kh < k; ++kh) {
      const int oy0 = std::max(0, pad - kh);
      const int oy1 = std::min(ho - 1, xs.h - 1 - kh + pad);
      for (int kw = 0; kw < k; ++kw) {
        const T wv = w.at(ci, 0, kh, kw);
        if (wv == T(0)) continue;
        const int ox0 = std::max(0, pad - kw);
        const int ox1 = std::min(wo - 1, xs.w - 1 - kw + pad);
        for (int oy = oy0; oy <= oy1; ++oy) {
          const T* xrow = xp + static_cast<std::int64_t>(oy + kh - pad) * xs.w + (kw - pad);
          T* yrow = yp + static_cast<std::int64_t>(oy) * wo;
          for (int ox = ox0; ox <= ox1; ++ox) yrow[ox] += wv * xrow[ox];
        }
      }
    }
  }
  return y;
}

template <typename T>
void depthwise_backward_input(Tensor<T>& gx, const Tensor<T>& w, const Tensor<T>& gy, int pad) {
  const Shape xs = gx.shape(), ws = w.shape(), ys = gy.shape();
  const int k = ws.h;
  const std::int64_t planes = static_cast<std::int64_t>(xs.n) * xs.c;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const int in = static_cast<int>(p / xs.c);
    const int ci = static_cast<int>(p % xs.c);
    T* gxp = gx.plane(in, ci);
    const T* gyp = gy.plane(in, ci);
    for (int kh = 0; kh < k; ++kh) {
      const int oy0 = std::max(0, pad - kh);
      const int oy1 = std::min(ys.h - 1, xs.h - 1 - kh + pad);
      for (int kw = 0; kw < k; ++kw) {
        const T wv = w.at(ci, 0, kh, kw);
        if (wv == T(0)) continue;
        const int ox0 = std::max(0, pad - kw);
        const int ox1 = std::min(ys.w - 1, xs.w - 1 - kw + pad);
        for (int oy = oy0; oy <= oy1; ++oy) {
          const T* grow = gyp + static_cast<std::int64_t>(oy) * ys.w;
          T* gxrow = gxp + static_cast<std::int64_t>(oy + kh - pad) * xs.w + (kw - pad);
          for (int ox = ox0; ox <= ox1; ++ox) gxrow[ox] += wv * grow[ox];
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward_weight(Tensor<T>& gw, const Tensor<T>& x, const Tensor<T>& gy, int pad) {
  const Shape xs = x.shape(), ws = gw.shape(), ys = gy.shape();
  const int k = ws.h;
#pragma omp parallel for schedule(static)
  for (int ci = 0; ci < ws.n; ++ci) {
    for (int kh = 0; kh < k; ++kh) {
      T acc[32] = {};
      const int oy0 = std::max(0, pad - kh);
      const int oy1 = std::min(ys.h - 1, xs.h - 1 - kh + pad);
      for (int in = 0; in < xs.n; ++in) {
        const T* gyp = gy.plane(in, ci);
        const T* xp = x.plane(in, ci);
        for (int oy = oy0; oy <= oy1; ++oy) {
          const T* grow = gyp + static_cast<std::int64_t>(oy) * ys.w;
          const T* xrow = xp + static_cast<std::int64_t>(oy + kh - pad) * xs.w;
          for (int kw = 0; kw < k; ++kw) {
            const int ox0 = std::max(0, pad - kw);
            const int ox1 = std::min(ys.w - 1, xs.w - 1 - kw + pad);
            T s = acc[kw];
            const T* xs2 = xrow + (kw - pad);
            for (int ox = ox0; ox <= ox1; ++ox) s += grow[ox] * xs2[ox];
            acc[kw] = s;
          }
        }
      }
      for (int kw = 0; kw < k; ++kw) gw.at(ci, 0, kh, kw) += acc[kw];
    }
  }
}

/// Per-channel spatial convolution followed by a 1x1 pointwise mix.
/// dw (c,1,k,k), pw (c_out,c,1,1), bias (c_out).
template <typename T>
Tensor<T> depthwise_separable_conv(const Tensor<T>& x, const Tensor<T>& dw,
                                   const Tensor<T>& pw, const Tensor<T>& bias) {
  Tensor<T> mid = depthwise_conv(x, dw, dw.shape().h / 2);
  return conv2d(mid, pw, bias, 1, 0);
}

// ---------------------------------------------------------------------------
// Activations.

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  detail::check(slope > T(0) && slope < T(1), "leaky_relu: slope must be in (0,1)");
  Tensor<T> y(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const T v = x[i];
    y[i] = v >= T(0) ? v : slope * v;
  }
  return y;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    y[i] = T(1) / (T(1) + std::exp(-x[i]));
  }
  return y;
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

// ---------------------------------------------------------------------------
// Resampling.

/// Duplicates every pixel into a 2x2 block.
template <typename T>
Tensor<T> nearest_up2(const Tensor<T>& x) {
  const Shape xs = x.shape();
  Tensor<T> y(Shape{xs.n, xs.c, xs.h * 2, xs.w * 2});
  for (int in = 0; in < xs.n; ++in) {
    for (int ic = 0; ic < xs.c; ++ic) {
      const T* xp = x.plane(in, ic);
      T* yp = y.plane(in, ic);
      for (int iy = 0; iy < xs.h; ++iy) {
        for (int ix = 0; ix < xs.w; ++ix) {
          const T v = xp[static_cast<std::int64_t>(iy) * xs.w + ix];
          T* o = yp + static_cast<std::int64_t>(2 * iy) * (2 * xs.w) + 2 * ix;
          o[0] = v;
          o[1] = v;
          o[2 * xs.w] = v;
          o[2 * xs.w + 1] = v;
        }
      }
    }
  }
  return y;
}

template <typename T>
void nearest_up2_backward(Tensor<T>& gx, const Tensor<T>& gy) {
  const Shape xs = gx.shape();
  for (int in = 0; in < xs.n; ++in) {
    for (int ic = 0; ic < xs.c; ++ic) {
      T* gxp = gx.plane(in, ic);
      const T* gyp = gy.plane(in, ic);
      for (int iy = 0; iy < xs.h; ++iy) {
        for (int ix = 0; ix < xs.w; ++ix) {
          const T* o = gyp + static_cast<std::int64_t>(2 * iy) * (2 * xs.w) + 2 * ix;
          gxp[static_cast<std::int64_t>(iy) * xs.w + ix] +=
              o[0] + o[1] + o[2 * xs.w] + o[2 * xs.w + 1];
        }
      }
    }
  }
}

namespace detail {

struct LerpTap {
  int lo, hi;
  double t;  // weight of hi
};

/// Half-pixel-center source coordinate (align-corners-false).
inline LerpTap bilinear_tap(int out_i, int out_len, int in_len) {
  const double src = (out_i + 0.5) * static_cast<double>(in_len) / out_len - 0.5;
  double f = std::floor(src);
  int lo = static_cast<int>(f);
  double t = src - f;
  if (lo < 0) {
    lo = 0;
    t = 0.0;
  }
  int hi = lo + 1;
  if (hi > in_len - 1) {
    hi = in_len - 1;
    if (lo > hi) lo = hi;
    if (lo == hi) t = 0.0;
  }
  return {lo, hi, t};
}

}  // namespace detail

/// Bilinear resize with half-pixel centers. Output values are convex
/// combinations of inputs, so any input range is preserved.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int oh, int ow) {
  detail::check(oh >= 1 && ow >= 1, "bilinear_resize: target dims must be >= 1");
  const Shape xs = x.shape();
  if (oh == xs.h && ow == xs.w) return x;
  Tensor<T> y(Shape{xs.n, xs.c, oh, ow});
  std::vector<detail::LerpTap> xtaps(static_cast<std::size_t>(ow));
  for (int ox = 0; ox < ow; ++ox) xtaps[static_cast<std::size_t>(ox)] = detail::bilinear_tap(ox, ow, xs.w);
  for (int in = 0; in < xs.n; ++in) {
    for (int ic = 0; ic < xs.c; ++ic) {
      const T* xp = x.plane(in, ic);
      T* yp = y.plane(in, ic);
      for (int oy = 0; oy < oh; ++oy) {
        const auto ty = detail::bilinear_tap(oy, oh, xs.h);
        const T* r0 = xp + static_cast<std::int64_t>(ty.lo) * xs.w;
        const T* r1 = xp + static_cast<std::int64_t>(ty.hi) * xs.w;
        T* yrow = yp + static_cast<std::int64_t>(oy) * ow;
        for (int ox = 0; ox < ow; ++ox) {
          const auto& tx = xtaps[static_cast<std::size_t>(ox)];
          const double a = (1.0 - ty.t) * ((1.0 - tx.t) * r0[tx.lo] + tx.t * r0[tx.hi]);
          const double b = ty.t * ((1.0 - tx.t) * r1[tx.lo] + tx.t * r1[tx.hi]);
          yrow[ox] = static_cast<T>(a + b);
        }
      }
    }
  }
  return y;
}

template <typename T>
void bilinear_resize_backward(Tensor<T>& gx, const Tensor<T>& gy) {
  const Shape xs = gx.shape(), ys = gy.shape();
  if (ys.h == xs.h && ys.w == xs.w) {
    for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += gy[i];
    return;
  }
  std::vector<detail::LerpTap> xtaps(static_cast<std::size_t>(ys.w));
  for (int ox = 0; ox < ys.w; ++ox) xtaps[static_cast<std::size_t>(ox)] = detail::bilinear_tap(ox, ys.w, xs.w);
  for (int in = 0; in < xs.n; ++in) {
    for (int ic = 0; ic < xs.c; ++ic) {
      T* gxp = gx.plane(in, ic);
      const T* gyp = gy.plane(in, ic);
      for (int oy = 0; oy < ys.h; ++oy) {
        const auto ty = detail::bilinear_tap(oy, ys.h, xs.h);
        T* r0 = gxp + static_cast<std::int64_t>(ty.lo) * xs.w;
        T* r1 = gxp + static_cast<std::int64_t>(ty.hi) * xs.w;
        const T* grow = gyp + static_cast<std::int64_t>(oy) * ys.w;
        for (int ox = 0; ox < ys.w; ++ox) {
          const auto& tx = xtaps[static_cast<std::size_t>(ox)];
          const double g = grow[ox];
          r0[tx.lo] += static_cast<T>((1.0 - ty.t) * (1.0 - tx.t) * g);
          r0[tx.hi] += static_cast<T>((1.0 - ty.t) * tx.t * g);
          r1[tx.lo] += static_cast<T>(ty.t * (1.0 - tx.t) * g);
          r1[tx.hi] += static_cast<T>(ty.t * tx.t * g);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic. b may be single-channel, in which case it is
// broadcast across a's channels.

namespace detail {

inline void check_broadcast(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return;
  if (b.c == 1 && a.n == b.n && a.h == b.h && a.w == b.w) return;
  throw ContractError(std::string(op) + ": incompatible shapes " + a.str() + " vs " + b.str());
}

template <typename T, typename F>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, F&& f, const char* op) {
  check_broadcast(a.shape(), b.shape(), op);
  Tensor<T> y(a.shape());
  if (a.shape() == b.shape()) {
    for (std::int64_t i = 0; i < a.numel(); ++i) y[i] = f(a[i], b[i]);
    return y;
  }
  const Shape as = a.shape();
  const std::int64_t hw = static_cast<std::int64_t>(as.h) * as.w;
  for (int in = 0; in < as.n; ++in) {
    const T* bp = b.plane(in, 0);
    for (int ic = 0; ic < as.c; ++ic) {
      const T* ap = a.plane(in, ic);
      T* yp = y.plane(in, ic);
      for (std::int64_t i = 0; i < hw; ++i) yp[i] = f(ap[i], bp[i]);
    }
  }
  return y;
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(a, b, [](T u, T v) { return u + v; }, "add");
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(a, b, [](T u, T v) { return u - v; }, "sub");
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(a, b, [](T u, T v) { return u * v; }, "mul");
}

/// Reduces a full-shape gradient onto a possibly single-channel operand.
template <typename T>
void reduce_to_operand(Tensor<T>& gb, const Tensor<T>& g) {
  const Shape bs = gb.shape(), gs = g.shape();
  if (bs == gs) {
    for (std::int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
    return;
  }
  const std::int64_t hw = static_cast<std::int64_t>(gs.h) * gs.w;
  for (int in = 0; in < gs.n; ++in) {
    T* gbp = gb.plane(in, 0);
    for (int ic = 0; ic < gs.c; ++ic) {
      const T* gp = g.plane(in, ic);
      for (std::int64_t i = 0; i < hw; ++i) gbp[i] += gp[i];
    }
  }
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  Tensor<T> y(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] * s;
  return y;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T s) {
  Tensor<T> y(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] + s;
  return y;
}

// ---------------------------------------------------------------------------
// Per-channel statistics used by the spectral block.

/// Mean over the spatial extent of each (image, channel) plane -> (n,c,1,1).
template <typename T>
Tensor<T> channel_mean(const Tensor<T>& x) {
  const Shape xs = x.shape();
  Tensor<T> y(Shape{xs.n, xs.c, 1, 1});
  const std::int64_t hw = static_cast<std::int64_t>(xs.h) * xs.w;
  for (int in = 0; in < xs.n; ++in) {
    for (int ic = 0; ic < xs.c; ++ic) {
      const T* xp = x.plane(in, ic);
      T s = 0;
      for (std::int64_t i = 0; i < hw; ++i) s += xp[i];
      y.at(in, ic, 0, 0) = s / static_cast<T>(hw);
    }
  }
  return y;
}

/// x / (s + eps) with s of shape (n,c,1,1) broadcast over space.
template <typename T>
Tensor<T> div_channel(const Tensor<T>& x, const Tensor<T>& s, T eps) {
  const Shape xs = x.shape();
  detail::check(s.shape().n == xs.n && s.shape().c == xs.c && s.shape().h == 1 && s.shape().w == 1,
                "div_channel: scale must be (n,c,1,1)");
  Tensor<T> y(xs);
  const std::int64_t hw = static_cast<std::int64_t>(xs.h) * xs.w;
  for (int in = 0; in < xs.n; ++in) {
    for (int ic = 0; ic < xs.c; ++ic) {
      const T d = s.at(in, ic, 0, 0) + eps;
      const T* xp = x.plane(in, ic);
      T* yp = y.plane(in, ic);
      for (std::int64_t i = 0; i < hw; ++i) yp[i] = xp[i] / d;
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Reductions.

template <typename T>
T sum_all(const Tensor<T>& x) {
  T s = 0;
  for (std::int64_t i = 0; i < x.numel(); ++i) s += x[i];
  return s;
}

template <typename T>
T mean_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape())) {
    throw ContractError("mean_abs_diff: shapes " + a.shape().str() + " vs " + b.shape().str());
  }
  T s = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<T>(a.numel());
}

template <typename T>
T max_abs(const Tensor<T>& x) {
  T m = 0;
  for (std::int64_t i = 0; i < x.numel(); ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  T m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename T>
bool all_finite(const Tensor<T>& x) {
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  return true;
}

}  // namespace aqua::ops
