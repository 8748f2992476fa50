#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "aqua/ops.hpp"
#include "aqua/tensor.hpp"

using aqua::ContractError;
using aqua::Shape;
using aqua::Tensor;

namespace {

// Pedestrian convolution used as the independent oracle: literal nested loops
// over the definition, no shared code with ops::conv2d.
template <typename T>
Tensor<T> conv_oracle(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                      int pad) {
  const Shape xs = x.shape(), ws = w.shape();
  const int k = ws.h;
  const int ho = (xs.h + 2 * pad - k) / stride + 1;
  const int wo = (xs.w + 2 * pad - k) / stride + 1;
  Tensor<T> y(Shape{xs.n, ws.n, ho, wo});
  for (int n = 0; n < xs.n; ++n) {
    for (int co = 0; co < ws.n; ++co) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          T acc = b[co];
          for (int ci = 0; ci < xs.c; ++ci) {
            for (int kh = 0; kh < k; ++kh) {
              for (int kw = 0; kw < k; ++kw) {
                const int iy = oy * stride + kh - pad;
                const int ix = ox * stride + kw - pad;
                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                acc += w.at(co, ci, kh, kw) * x.at(n, ci, iy, ix);
              }
            }
          }
          y.at(n, co, oy, ox) = acc;
        }
      }
    }
  }
  return y;
}

template <typename T>
void expect_near_tensor(const Tensor<T>& a, const Tensor<T>& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape()) << a.shape().str() << " vs " << b.shape().str();
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    ASSERT_NEAR(a[i], b[i], tol) << "at flat index " << i;
  }
}

}  // namespace

TEST(Conv2d, IdentityOneByOneKernel) {
  auto x = Tensor<float>::uniform(Shape{2, 3, 5, 7}, 1, "x");
  Tensor<float> w(Shape{3, 3, 1, 1});
  for (int i = 0; i < 3; ++i) w.at(i, i, 0, 0) = 1.0f;
  Tensor<float> b(Shape{3, 1, 1, 1});
  auto y = aqua::ops::conv2d(x, w, b, 1, 0);
  EXPECT_TRUE(y == x);  // exact
}

TEST(Conv2d, AllOnesKernelOn2x2) {
  Tensor<float> x(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  Tensor<float> w(Shape{1, 1, 3, 3}, 1.0f);
  Tensor<float> b(Shape{1, 1, 1, 1});
  auto y = aqua::ops::conv2d(x, w, b, 1, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (std::int64_t i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(y[i], 10.0f);
}

TEST(Conv2d, StridedShapeFormula) {
  Tensor<float> x(Shape{1, 3, 128, 128});
  Tensor<float> w(Shape{32, 3, 3, 3});
  Tensor<float> b(Shape{32, 1, 1, 1});
  auto y = aqua::ops::conv2d(x, w, b, 2, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 32, 64, 64}));
}

TEST(Conv2d, MatchesOracleOnRandomInputs) {
  for (int stride : {1, 2}) {
    for (int pad : {0, 1, 2}) {
      auto x = Tensor<double>::uniform(Shape{2, 3, 9, 11}, 7 + stride, "x");
      auto w = Tensor<double>::uniform(Shape{4, 3, 3, 3}, 11 + pad, "w");
      auto b = Tensor<double>::uniform(Shape{4, 1, 1, 1}, 13, "b");
      auto y = aqua::ops::conv2d(x, w, b, stride, pad);
      auto ref = conv_oracle(x, w, b, stride, pad);
      expect_near_tensor(y, ref, 1e-12);
    }
  }
}

TEST(Conv2d, ChannelMismatchThrows) {
  Tensor<float> x(Shape{1, 2, 4, 4});
  Tensor<float> w(Shape{1, 3, 3, 3});
  Tensor<float> b(Shape{1, 1, 1, 1});
  EXPECT_THROW(aqua::ops::conv2d(x, w, b, 1, 1), ContractError);
}

TEST(Conv2d, Purity) {
  auto x = Tensor<float>::uniform(Shape{1, 4, 16, 16}, 3, "x");
  auto w = Tensor<float>::uniform(Shape{4, 4, 3, 3}, 4, "w");
  auto b = Tensor<float>::uniform(Shape{4, 1, 1, 1}, 5, "b");
  auto y1 = aqua::ops::conv2d(x, w, b, 1, 1);
  auto y2 = aqua::ops::conv2d(x, w, b, 1, 1);
  EXPECT_TRUE(y1 == y2);  // bitwise
}

TEST(DepthwiseSeparable, IdentityComposition) {
  auto x = Tensor<float>::uniform(Shape{1, 3, 6, 6}, 21, "x");
  Tensor<float> dw(Shape{3, 1, 1, 1}, 1.0f);
  Tensor<float> pw(Shape{3, 3, 1, 1});
  for (int i = 0; i < 3; ++i) pw.at(i, i, 0, 0) = 1.0f;
  Tensor<float> b(Shape{3, 1, 1, 1});
  auto y = aqua::ops::depthwise_separable_conv(x, dw, pw, b);
  EXPECT_TRUE(y == x);
}

TEST(DepthwiseSeparable, EqualsPerChannelConvThenPointwise) {
  auto x = Tensor<double>::uniform(Shape{1, 2, 4, 4}, 31, "x");
  auto dw = Tensor<double>::uniform(Shape{2, 1, 3, 3}, 32, "dw");
  auto pw = Tensor<double>::uniform(Shape{3, 2, 1, 1}, 33, "pw");
  auto b = Tensor<double>::uniform(Shape{3, 1, 1, 1}, 34, "b");

  // Oracle: each channel through conv2d with a single-channel kernel, then a
  // 1x1 conv across channels.
  Tensor<double> mid(Shape{1, 2, 4, 4});
  for (int c = 0; c < 2; ++c) {
    Tensor<double> xc(Shape{1, 1, 4, 4});
    for (int i = 0; i < 16; ++i) xc[i] = x.plane(0, c)[i];
    Tensor<double> wc(Shape{1, 1, 3, 3});
    for (int i = 0; i < 9; ++i) wc[i] = dw.plane(c, 0)[i];
    Tensor<double> zb(Shape{1, 1, 1, 1});
    auto yc = conv_oracle(xc, wc, zb, 1, 1);
    for (int i = 0; i < 16; ++i) mid.plane(0, c)[i] = yc[i];
  }
  auto ref = conv_oracle(mid, pw, b, 1, 0);

  auto y = aqua::ops::depthwise_separable_conv(x, dw, pw, b);
  expect_near_tensor(y, ref, 1e-9);
}

TEST(DepthwiseSeparable, ZeroWeightsAnnihilate) {
  auto x = Tensor<float>::uniform(Shape{2, 4, 8, 8}, 41, "x");
  Tensor<float> dw(Shape{4, 1, 3, 3});
  Tensor<float> pw(Shape{4, 4, 1, 1});
  Tensor<float> b(Shape{4, 1, 1, 1});
  auto y = aqua::ops::depthwise_separable_conv(x, dw, pw, b);
  for (std::int64_t i = 0; i < y.numel(); ++i) EXPECT_EQ(y[i], 0.0f);
}

TEST(DepthwiseSeparable, ChannelMismatchThrows) {
  Tensor<float> x(Shape{1, 3, 4, 4});
  Tensor<float> dw(Shape{2, 1, 3, 3});
  EXPECT_THROW(aqua::ops::depthwise_conv(x, dw, 1), ContractError);
}

TEST(Activations, SpotValues) {
  Tensor<float> x(Shape{1, 1, 1, 3}, std::vector<float>{-1.0f, 0.0f, 1.0f});
  auto lr = aqua::ops::leaky_relu(x, 0.2f);
  EXPECT_FLOAT_EQ(lr[0], -0.2f);
  EXPECT_FLOAT_EQ(lr[1], 0.0f);
  EXPECT_FLOAT_EQ(lr[2], 1.0f);
  auto sg = aqua::ops::sigmoid(x);
  EXPECT_FLOAT_EQ(sg[1], 0.5f);
  auto th = aqua::ops::tanh(x);
  EXPECT_FLOAT_EQ(th[1], 0.0f);
}

TEST(Activations, MatchScalarMathPointwise) {
  auto x = Tensor<double>::uniform(Shape{1, 2, 5, 5}, 51, "x", -4.0, 4.0);
  auto lr = aqua::ops::leaky_relu(x, 0.2);
  auto sg = aqua::ops::sigmoid(x);
  auto th = aqua::ops::tanh(x);
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    EXPECT_DOUBLE_EQ(lr[i], x[i] >= 0 ? x[i] : 0.2 * x[i]);
    EXPECT_NEAR(sg[i], 1.0 / (1.0 + std::exp(-x[i])), 1e-15);
    EXPECT_NEAR(th[i], std::tanh(x[i]), 1e-15);
    EXPECT_GT(sg[i], 0.0);
    EXPECT_LT(sg[i], 1.0);
  }
}

TEST(Activations, SlopeRangeEnforced) {
  Tensor<float> x(Shape{1, 1, 1, 1});
  EXPECT_THROW(aqua::ops::leaky_relu(x, 1.5f), ContractError);
}

TEST(Resample, NearestUp2Duplicates) {
  Tensor<float> x(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  auto y = aqua::ops::nearest_up2(x);
  const std::vector<float> want = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  for (int i = 0; i < 16; ++i) EXPECT_FLOAT_EQ(y[i], want[static_cast<std::size_t>(i)]);
}

TEST(Resample, BilinearSameSizeIsIdentity) {
  auto x = Tensor<float>::uniform(Shape{1, 3, 7, 9}, 61, "x");
  auto y = aqua::ops::bilinear_resize(x, 7, 9);
  EXPECT_TRUE(y == x);
}

TEST(Resample, BilinearHalfPixelOracle2x2To4x4) {
  Tensor<double> x(Shape{1, 1, 2, 2}, std::vector<double>{0, 1, 2, 3});
  auto y = aqua::ops::bilinear_resize(x, 4, 4);
  // Half-pixel source coordinates: out i maps to src (i+0.5)/2-0.5, clamped.
  // 1-D weights on [v0,v1]: i=0 -> v0, i=1 -> 0.75 v0 + 0.25 v1,
  // i=2 -> 0.25 v0 + 0.75 v1, i=3 -> v1.
  const double wx[4][2] = {{1, 0}, {0.75, 0.25}, {0.25, 0.75}, {0, 1}};
  for (int oy = 0; oy < 4; ++oy) {
    for (int ox = 0; ox < 4; ++ox) {
      double want = 0;
      for (int a = 0; a < 2; ++a) {
        for (int bcol = 0; bcol < 2; ++bcol) {
          want += wx[oy][a] * wx[ox][bcol] * x.at(0, 0, a, bcol);
        }
      }
      EXPECT_NEAR(y.at(0, 0, oy, ox), want, 1e-12) << oy << "," << ox;
    }
  }
}

TEST(Resample, ZeroTargetThrows) {
  Tensor<float> x(Shape{1, 1, 4, 4});
  EXPECT_THROW(aqua::ops::bilinear_resize(x, 0, 4), ContractError);
}

TEST(Elementwise, Identities) {
  auto a = Tensor<float>::uniform(Shape{1, 4, 6, 6}, 71, "a");
  Tensor<float> ones(a.shape(), 1.0f);
  Tensor<float> zeros(a.shape());
  EXPECT_TRUE(aqua::ops::mul(a, ones) == a);
  EXPECT_TRUE(aqua::ops::add(a, zeros) == a);
}

TEST(Elementwise, SingleChannelBroadcastMatchesExplicitReplication) {
  auto a = Tensor<double>::uniform(Shape{2, 32, 5, 5}, 81, "a");
  auto m = Tensor<double>::uniform(Shape{2, 1, 5, 5}, 82, "m");
  auto y = aqua::ops::mul(a, m);
  Tensor<double> rep(a.shape());
  for (int n = 0; n < 2; ++n) {
    for (int c = 0; c < 32; ++c) {
      for (int i = 0; i < 25; ++i) rep.plane(n, c)[i] = m.plane(n, 0)[i];
    }
  }
  auto ref = aqua::ops::mul(a, rep);
  expect_near_tensor(y, ref, 0.0);
}

TEST(Elementwise, IncompatibleShapesThrow) {
  Tensor<float> a(Shape{1, 4, 6, 6});
  Tensor<float> b(Shape{1, 2, 6, 6});
  EXPECT_THROW(aqua::ops::add(a, b), ContractError);
  EXPECT_THROW(aqua::ops::mul(a, b), ContractError);
}
