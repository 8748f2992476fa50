#include <cmath>

#include <gtest/gtest.h>

#include "aqua/metrics.hpp"
#include "aqua/rng.hpp"

using aqua::RgbImage8;

namespace {

RgbImage8 constant_image(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage8 img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.px(y, x)[0] = r;
      img.px(y, x)[1] = g;
      img.px(y, x)[2] = b;
    }
  }
  return img;
}

RgbImage8 random_image(int h, int w, std::uint64_t seed) {
  RgbImage8 img(h, w);
  aqua::CounterRng rng(seed, "img");
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(rng.below(i, 256));
  }
  return img;
}

// Direct per-window SSIM oracle on BT.601 luminance; no shared code with the
// separable production path.
double ssim_window_oracle(const RgbImage8& a, const RgbImage8& b) {
  const int n = 11;
  const double sigma = 1.5;
  std::vector<double> win(static_cast<std::size_t>(n) * n);
  double wsum = 0.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double dy = y - n / 2, dx = x - n / 2;
      win[static_cast<std::size_t>(y) * n + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      wsum += win[static_cast<std::size_t>(y) * n + x];
    }
  }
  for (auto& v : win) v /= wsum;
  auto lum = [](const RgbImage8& img, int y, int x) {
    const std::uint8_t* p = img.px(y, x);
    return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  };
  const double c1 = 6.5025, c2 = 58.5225;
  double total = 0.0;
  int count = 0;
  for (int oy = 0; oy + n <= a.h; ++oy) {
    for (int ox = 0; ox + n <= a.w; ++ox) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const double w = win[static_cast<std::size_t>(y) * n + x];
          const double va = lum(a, oy + y, ox + x);
          const double vb = lum(b, oy + y, ox + x);
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      }
      const double vva = saa - ma * ma, vvb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (vva + vvb + c2));
      ++count;
    }
  }
  return total / count;
}

}  // namespace

TEST(Psnr, IdenticalImagesAreInfinite) {
  auto img = random_image(16, 16, 1);
  EXPECT_TRUE(std::isinf(aqua::psnr(img, img)));
  EXPECT_GT(aqua::psnr(img, img), 0);
}

TEST(Psnr, FullSwingIsZeroDb) {
  auto black = constant_image(8, 8, 0, 0, 0);
  auto white = constant_image(8, 8, 255, 255, 255);
  EXPECT_DOUBLE_EQ(aqua::psnr(black, white), 0.0);
}

TEST(Psnr, UnitMseClosedForm) {
  auto a = constant_image(8, 8, 100, 100, 100);
  auto b = constant_image(8, 8, 101, 101, 101);  // MSE exactly 1
  EXPECT_NEAR(aqua::psnr(a, b), 20.0 * std::log10(255.0), 1e-9);
  EXPECT_NEAR(aqua::psnr(a, b), 48.1308, 1e-3);
}

TEST(Psnr, SymmetricAndMatchesNaive) {
  auto a = random_image(16, 16, 2);
  auto b = random_image(16, 16, 3);
  EXPECT_DOUBLE_EQ(aqua::psnr(a, b), aqua::psnr(b, a));
  double acc = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = double(a.pixels[i]) - double(b.pixels[i]);
    acc += d * d;
  }
  const double naive = 10.0 * std::log10(255.0 * 255.0 / (acc / double(a.pixels.size())));
  EXPECT_NEAR(aqua::psnr(a, b), naive, 1e-6);
}

TEST(Psnr, DimensionMismatchThrows) {
  EXPECT_THROW(aqua::psnr(constant_image(8, 8, 0, 0, 0), constant_image(8, 9, 0, 0, 0)),
               aqua::ContractError);
}

TEST(Ssim, IdenticalImagesAreExactlyOne) {
  auto img = random_image(20, 24, 4);
  EXPECT_EQ(aqua::ssim(img, img), 1.0);
}

TEST(Ssim, ConstantExtremesClosedForm) {
  auto black = constant_image(16, 16, 0, 0, 0);
  auto white = constant_image(16, 16, 255, 255, 255);
  const double c1 = 6.5025;
  EXPECT_NEAR(aqua::ssim(black, white), c1 / (255.0 * 255.0 + c1), 1e-9);
  EXPECT_NEAR(aqua::ssim(black, white), 1.0e-4, 2e-5);
}

TEST(Ssim, MatchesWindowOracle) {
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto a = random_image(16, 16, 10 + s);
    auto b = random_image(16, 16, 20 + s);
    EXPECT_NEAR(aqua::ssim(a, b), ssim_window_oracle(a, b), 1e-6);
  }
}

TEST(Ssim, SymmetricWithinTolerance) {
  auto a = random_image(16, 16, 30);
  auto b = random_image(16, 16, 31);
  EXPECT_NEAR(aqua::ssim(a, b), aqua::ssim(b, a), 1e-9);
}

TEST(Ssim, SmallImageThrows) {
  auto a = constant_image(10, 16, 5, 5, 5);
  EXPECT_THROW(aqua::ssim(a, a), aqua::ContractError);
}

TEST(Uiqm, ConstantGrayIsZero) {
  auto gray = constant_image(32, 32, 128, 128, 128);
  EXPECT_NEAR(aqua::uicm(gray), 0.0, 1e-9);
  EXPECT_NEAR(aqua::uism(gray), 0.0, 1e-9);
  EXPECT_NEAR(aqua::uiconm(gray), 0.0, 1e-9);
  EXPECT_NEAR(aqua::uiqm(gray), 0.0, 1e-9);
}

TEST(Uiqm, PureRedColorfulnessOracle) {
  auto red = constant_image(16, 16, 255, 0, 0);
  // Opponent channels are constant: RG = 255, YB = 127.5. Trimmed means equal
  // the constants, variances vanish.
  const double want = -0.0268 * std::sqrt(255.0 * 255.0 + 127.5 * 127.5);
  EXPECT_NEAR(aqua::uicm(red), want, 1e-9);
}

TEST(Uiqm, DeterministicPureFunction) {
  auto img = random_image(40, 56, 40);
  EXPECT_DOUBLE_EQ(aqua::uiqm(img), aqua::uiqm(img));
  EXPECT_DOUBLE_EQ(aqua::uciqe(img), aqua::uciqe(img));
}

TEST(Uiqm, TrimmedMeanIgnoresOutliers) {
  // 100 samples: 80 at value 10, 10 at -1000, 10 at +1000. The 10% trim
  // removes exactly the outliers.
  std::vector<double> v(80, 10.0);
  for (int i = 0; i < 10; ++i) v.push_back(-1000.0);
  for (int i = 0; i < 10; ++i) v.push_back(1000.0);
  const auto st = aqua::metric_detail::trimmed_stats(v);
  EXPECT_NEAR(st.mean, 10.0, 1e-12);
}

TEST(Uiqm, SharperImageScoresHigherUism) {
  auto flat = constant_image(32, 32, 100, 100, 100);
  RgbImage8 checker(32, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const std::uint8_t v = ((x / 2 + y / 2) % 2) ? 220 : 40;
      checker.px(y, x)[0] = checker.px(y, x)[1] = checker.px(y, x)[2] = v;
    }
  }
  EXPECT_GT(aqua::uism(checker), aqua::uism(flat));
  EXPECT_GT(aqua::uiconm(checker), aqua::uiconm(flat));
}

TEST(Uciqe, ConstantGrayIsZero) {
  for (std::uint8_t v : {0, 64, 128, 200, 255}) {
    auto gray = constant_image(16, 16, v, v, v);
    EXPECT_NEAR(aqua::uciqe(gray), 0.0, 1e-9) << static_cast<int>(v);
  }
}

TEST(Uciqe, WhitePointLabSpotCheck) {
  const auto lab = aqua::metric_detail::srgb_to_lab(255, 255, 255);
  EXPECT_NEAR(lab.l, 100.0, 1e-9);
  EXPECT_NEAR(lab.a, 0.0, 1e-9);
  EXPECT_NEAR(lab.b, 0.0, 1e-9);
}

TEST(Uciqe, KnownLabValuesForPrimaries) {
  // Reference values from the standard sRGB D65 transform.
  const auto red = aqua::metric_detail::srgb_to_lab(255, 0, 0);
  EXPECT_NEAR(red.l, 53.24, 0.05);
  EXPECT_NEAR(red.a, 80.09, 0.1);
  EXPECT_NEAR(red.b, 67.2, 0.1);
  const auto blue = aqua::metric_detail::srgb_to_lab(0, 0, 255);
  EXPECT_NEAR(blue.l, 32.30, 0.05);
}

TEST(Uciqe, ColorfulBeatsGray) {
  RgbImage8 colorful(16, 16);
  aqua::CounterRng rng(50, "c");
  for (std::size_t i = 0; i < colorful.pixels.size(); ++i) {
    colorful.pixels[i] = static_cast<std::uint8_t>(rng.below(i, 256));
  }
  auto gray = constant_image(16, 16, 120, 120, 120);
  EXPECT_GT(aqua::uciqe(colorful), aqua::uciqe(gray));
}
