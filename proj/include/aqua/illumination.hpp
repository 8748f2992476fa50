#pragma once

#include <algorithm>
#include <limits>
#include <utility>

#include "aqua/autodiff.hpp"
#include "aqua/ops.hpp"
#include "aqua/spectral.hpp"

// Illumination branch. A three-layer conv stack predicts two coefficient maps
// from the raw image; the illumination map L = sigmoid(a) * (1 + tanh(b))
// lies strictly in (0, 2) and is bilinearly rescaled to each decoder stage,
// where it multiplies the skip features.

namespace aqua {

template <typename T = float>
struct IlluminationParams {
  ConvParams<T> c1;  // 3 -> 16
  ConvParams<T> c2;  // 16 -> 16
  ConvParams<T> c3;  // 16 -> 2, no activation on the output
  T leaky_slope = T(0.2);

  IlluminationParams() = default;
  explicit IlluminationParams(int hidden)
      : c1("illum.conv1", hidden, 3, 3),
        c2("illum.conv2", hidden, hidden, 3),
        c3("illum.conv3", 2, hidden, 3) {}
};

/// Raw coefficient maps (alpha, beta), each (n,1,h,w), unbounded.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> predict_coefficients(const Tensor<T>& input,
                                                     const IlluminationParams<T>& p) {
  if (input.shape().c != 3) {
    throw ContractError("predict_coefficients: input must have 3 channels");
  }
  Tensor<T> h = ops::conv2d(input, p.c1.w.value, p.c1.b.value, 1, 1);
  h = ops::leaky_relu(h, p.leaky_slope);
  h = ops::conv2d(h, p.c2.w.value, p.c2.b.value, 1, 1);
  h = ops::leaky_relu(h, p.leaky_slope);
  h = ops::conv2d(h, p.c3.w.value, p.c3.b.value, 1, 1);
  const Shape s = h.shape();
  Tensor<T> alpha(Shape{s.n, 1, s.h, s.w});
  Tensor<T> beta(Shape{s.n, 1, s.h, s.w});
  const std::int64_t hw = static_cast<std::int64_t>(s.h) * s.w;
  for (int in = 0; in < s.n; ++in) {
    const T* a = h.plane(in, 0);
    const T* b = h.plane(in, 1);
    T* ap = alpha.plane(in, 0);
    T* bp = beta.plane(in, 0);
    for (std::int64_t i = 0; i < hw; ++i) {
      ap[i] = a[i];
      bp[i] = b[i];
    }
  }
  return {std::move(alpha), std::move(beta)};
}

namespace illum_detail {

// The map is open-range (0, 2) mathematically, but tanh and sigmoid saturate
// to their closed limits in floating point. Pin saturated entries to the
// nearest representable interior values; the true gradient there is already
// below resolvable precision.
template <typename T>
constexpr T range_lo() {
  return std::numeric_limits<T>::min();
}
template <typename T>
constexpr T range_hi() {
  return T(2) - std::numeric_limits<T>::epsilon();
}

}  // namespace illum_detail

/// L = sigmoid(alpha) * (1 + tanh(beta)), elementwise strictly inside (0, 2).
template <typename T>
Tensor<T> illumination_map(const Tensor<T>& alpha_map, const Tensor<T>& beta_map) {
  if (!(alpha_map.shape() == beta_map.shape()) || alpha_map.shape().c != 1) {
    throw ContractError("illumination_map: expects matching single-channel maps");
  }
  Tensor<T> l(alpha_map.shape());
  for (std::int64_t i = 0; i < l.numel(); ++i) {
    const T sa = T(1) / (T(1) + std::exp(-alpha_map[i]));
    const T v = sa * (T(1) + std::tanh(beta_map[i]));
    l[i] = std::clamp(v, illum_detail::range_lo<T>(), illum_detail::range_hi<T>());
  }
  return l;
}

/// Bilinear rescale; convexity keeps the (0, 2) range intact.
template <typename T>
Tensor<T> rescale_illumination(const Tensor<T>& l, int h, int w) {
  return ops::bilinear_resize(l, h, w);
}

/// Tape-recorded branch: input image -> illumination map node.
template <typename T>
Var illumination_fwd(Tape<T>& t, Var input, IlluminationParams<T>& p) {
  Var h = ad::conv2d(t, input, t.param(p.c1.w), t.param(p.c1.b), 1, 1);
  h = ad::leaky_relu(t, h, p.leaky_slope);
  h = ad::conv2d(t, h, t.param(p.c2.w), t.param(p.c2.b), 1, 1);
  h = ad::leaky_relu(t, h, p.leaky_slope);
  h = ad::conv2d(t, h, t.param(p.c3.w), t.param(p.c3.b), 1, 1);
  Var alpha = ad::slice_channel(t, h, 0);
  Var beta = ad::slice_channel(t, h, 1);
  Var sa = ad::sigmoid(t, alpha);
  Var tb = ad::tanh(t, beta);
  Tensor<T> one_t(t.val(tb).shape(), T(1));
  Var gain = ad::add(t, tb, t.constant(std::move(one_t), "one"));
  Var l = ad::mul(t, sa, gain);
  return ad::clamp(t, l, illum_detail::range_lo<T>(), illum_detail::range_hi<T>());
}

}  // namespace aqua
