#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "aqua/errors.hpp"
#include "aqua/image.hpp"

// Image quality metrics over 8-bit sRGB input.
//
// PSNR/SSIM follow the usual reference definitions (SSIM on BT.601 luminance,
// 11x11 Gaussian window sigma 1.5, K1=0.01 K2=0.03, dynamic range 255,
// averaged over valid window positions). The no-reference underwater metrics
// have several published variants; this implementation pins one set of
// conventions and treats it as part of the library contract:
//   UICM    asymmetric alpha-trimmed mean, 10% per tail, over the RG/YB
//           opponent channels; variance taken over all pixels about the
//           trimmed mean; UICM = -0.0268 mu + 0.1586 sigma.
//   UISM    Sobel gradient magnitude per channel (image border excluded),
//           multiplied by the channel, then EME = (2/K) sum ln(max/min) over
//           full 8x8 blocks; channel weights 0.299 / 0.587 / 0.144.
//   UIConM  logAMEE of BT.601 luminance over full 8x8 blocks with PLIP
//           arithmetic, gamma = 1026: m = (mx (-) mn) / (mx (+) mn),
//           UIConM = -(1/K) sum m ln m.
//   UIQM  = 0.0282 UICM + 0.2953 UISM + 3.5753 UIConM.
//   UCIQE = 0.4680 (std chroma / 100) + 0.2745 ((P99 - P1 of L*) / 100)
//         + 0.2576 (mean saturation), in CIELab under D65.

namespace aqua {

struct MetricReport {
  double psnr = 0.0;  // dB; +inf when the images are identical
  double ssim = 0.0;
  double uiqm = 0.0;
  double uciqe = 0.0;
};

// ---------------------------------------------------------------------------
// PSNR.

inline double mse(const RgbImage8& a, const RgbImage8& b) {
  if (a.h != b.h || a.w != b.w) {
    throw ContractError("psnr: image dimensions differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.pixels.size());
}

inline double psnr(const RgbImage8& a, const RgbImage8& b) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / m);
}

// ---------------------------------------------------------------------------
// SSIM.

namespace metric_detail {

inline std::vector<double> luminance(const RgbImage8& img) {
  std::vector<double> y(static_cast<std::size_t>(img.h) * img.w);
  for (int r = 0; r < img.h; ++r) {
    for (int c = 0; c < img.w; ++c) {
      const std::uint8_t* p = img.px(r, c);
      y[static_cast<std::size_t>(r) * img.w + c] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
  }
  return y;
}

inline std::vector<double> gaussian_window(int n, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(n));
  const int half = n / 2;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = i - half;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= total;
  return w;
}

/// Separable valid-mode filtering: (h x w) -> (h-n+1 x w-n+1).
inline std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                        const std::vector<double>& win) {
  const int n = static_cast<int>(win.size());
  const int vw = w - n + 1;
  const int vh = h - n + 1;
  std::vector<double> horiz(static_cast<std::size_t>(h) * vw);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        s += win[static_cast<std::size_t>(k)] * img[static_cast<std::size_t>(y) * w + x + k];
      }
      horiz[static_cast<std::size_t>(y) * vw + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(vh) * vw);
  for (int y = 0; y < vh; ++y) {
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        s += win[static_cast<std::size_t>(k)] * horiz[static_cast<std::size_t>(y + k) * vw + x];
      }
      out[static_cast<std::size_t>(y) * vw + x] = s;
    }
  }
  return out;
}

}  // namespace metric_detail

inline double ssim(const RgbImage8& a, const RgbImage8& b) {
  if (a.h != b.h || a.w != b.w) throw ContractError("ssim: image dimensions differ");
  constexpr int kWin = 11;
  if (a.h < kWin || a.w < kWin) {
    throw ContractError("ssim: image smaller than the 11x11 window");
  }
  const auto ya = metric_detail::luminance(a);
  const auto yb = metric_detail::luminance(b);
  const auto win = metric_detail::gaussian_window(kWin, 1.5);
  const int h = a.h, w = a.w;

  std::vector<double> aa(ya.size()), bb(ya.size()), ab(ya.size());
  for (std::size_t i = 0; i < ya.size(); ++i) {
    aa[i] = ya[i] * ya[i];
    bb[i] = yb[i] * yb[i];
    ab[i] = ya[i] * yb[i];
  }
  const auto mu_a = metric_detail::filter_valid(ya, h, w, win);
  const auto mu_b = metric_detail::filter_valid(yb, h, w, win);
  const auto m_aa = metric_detail::filter_valid(aa, h, w, win);
  const auto m_bb = metric_detail::filter_valid(bb, h, w, win);
  const auto m_ab = metric_detail::filter_valid(ab, h, w, win);

  constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
  constexpr double kC2 = (0.03 * 255) * (0.03 * 255);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = m_aa[i] - mu_a[i] * mu_a[i];
    const double vb = m_bb[i] - mu_b[i] * mu_b[i];
    const double cov = m_ab[i] - mu_a[i] * mu_b[i];
    const double num = (2.0 * mu_a[i] * mu_b[i] + kC1) * (2.0 * cov + kC2);
    const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1) * (va + vb + kC2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

// ---------------------------------------------------------------------------
// UIQM.

namespace metric_detail {

struct TrimmedStats {
  double mean;
  double var;
};

/// Trimmed mean (10% per tail) plus variance of all samples about it.
inline TrimmedStats trimmed_stats(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  const std::size_t t = static_cast<std::size_t>(0.1 * static_cast<double>(n));
  double mean = 0.0;
  const std::size_t kept = n - 2 * t;
  for (std::size_t i = t; i < n - t; ++i) mean += v[i];
  mean /= static_cast<double>(kept);
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n);
  return {mean, var};
}

/// EME over full 8x8 blocks: (2/K) sum ln(max/min); zero-min blocks skip.
inline double eme8(const std::vector<double>& img, int h, int w) {
  const int k2 = h / 8, k1 = w / 8;
  if (k1 == 0 || k2 == 0) return 0.0;
  double acc = 0.0;
  for (int by = 0; by < k2; ++by) {
    for (int bx = 0; bx < k1; ++bx) {
      double mn = std::numeric_limits<double>::infinity(), mx = 0.0;
      for (int y = by * 8; y < by * 8 + 8; ++y) {
        for (int x = bx * 8; x < bx * 8 + 8; ++x) {
          const double v = img[static_cast<std::size_t>(y) * w + x];
          mn = std::min(mn, v);
          mx = std::max(mx, v);
        }
      }
      if (mn > 0.0 && mx > 0.0) acc += std::log(mx / mn);
    }
  }
  return 2.0 / (static_cast<double>(k1) * k2) * acc;
}

/// Sobel gradient magnitude; the one-pixel border is left at zero.
inline std::vector<double> sobel_magnitude(const std::vector<double>& img, int h, int w) {
  std::vector<double> out(img.size(), 0.0);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      auto at = [&](int yy, int xx) { return img[static_cast<std::size_t>(yy) * w + xx]; };
      const double gx = -at(y - 1, x - 1) + at(y - 1, x + 1) - 2.0 * at(y, x - 1) +
                        2.0 * at(y, x + 1) - at(y + 1, x - 1) + at(y + 1, x + 1);
      const double gy = -at(y - 1, x - 1) - 2.0 * at(y - 1, x) - at(y - 1, x + 1) +
                        at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1);
      out[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

}  // namespace metric_detail

/// Colorfulness from the RG / YB opponent channels.
inline double uicm(const RgbImage8& img) {
  const std::size_t n = static_cast<std::size_t>(img.h) * img.w;
  std::vector<double> rg(n), yb(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = img.pixels[3 * i];
    const double g = img.pixels[3 * i + 1];
    const double b = img.pixels[3 * i + 2];
    rg[i] = r - g;
    yb[i] = (r + g) / 2.0 - b;
  }
  const auto s_rg = metric_detail::trimmed_stats(std::move(rg));
  const auto s_yb = metric_detail::trimmed_stats(std::move(yb));
  const double mu = std::sqrt(s_rg.mean * s_rg.mean + s_yb.mean * s_yb.mean);
  const double sigma = std::sqrt(s_rg.var + s_yb.var);
  return -0.0268 * mu + 0.1586 * sigma;
}

/// Sharpness: EME of the Sobel-weighted channels.
inline double uism(const RgbImage8& img) {
  const std::size_t n = static_cast<std::size_t>(img.h) * img.w;
  const double lambda[3] = {0.299, 0.587, 0.144};
  double total = 0.0;
  std::vector<double> chan(n), edge(n);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) chan[i] = img.pixels[3 * i + static_cast<std::size_t>(c)];
    const auto grad = metric_detail::sobel_magnitude(chan, img.h, img.w);
    for (std::size_t i = 0; i < n; ++i) edge[i] = chan[i] * grad[i];
    total += lambda[c] * metric_detail::eme8(edge, img.h, img.w);
  }
  return total;
}

/// Contrast: logAMEE of the luminance with PLIP arithmetic.
inline double uiconm(const RgbImage8& img) {
  constexpr double kGamma = 1026.0;
  const auto lum = metric_detail::luminance(img);
  const int k2 = img.h / 8, k1 = img.w / 8;
  if (k1 == 0 || k2 == 0) return 0.0;
  double acc = 0.0;
  for (int by = 0; by < k2; ++by) {
    for (int bx = 0; bx < k1; ++bx) {
      double mn = std::numeric_limits<double>::infinity(), mx = 0.0;
      for (int y = by * 8; y < by * 8 + 8; ++y) {
        for (int x = bx * 8; x < bx * 8 + 8; ++x) {
          const double v = lum[static_cast<std::size_t>(y) * img.w + x];
          mn = std::min(mn, v);
          mx = std::max(mx, v);
        }
      }
      const double top = kGamma * (mx - mn) / (kGamma - mn);   // PLIP subtraction
      const double bot = mx + mn - mx * mn / kGamma;           // PLIP addition
      if (top > 0.0 && bot > 0.0) {
        const double m = top / bot;
        if (m > 0.0) acc += m * std::log(m);
      }
    }
  }
  return -acc / (static_cast<double>(k1) * k2);
}

inline double uiqm(const RgbImage8& img) {
  return 0.0282 * uicm(img) + 0.2953 * uism(img) + 3.5753 * uiconm(img);
}

// ---------------------------------------------------------------------------
// UCIQE.

namespace metric_detail {

struct Lab {
  double l, a, b;
};

/// sRGB (D65) to CIELab. The white point is taken as the matrix row sums so
/// the gray axis maps to a* = b* = 0 up to rounding.
inline Lab srgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  auto linearize = [](double c) {
    c /= 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  static constexpr double kM[3][3] = {
      {0.41239079926595934, 0.357584339383878, 0.1804807884018343},
      {0.21263900587151027, 0.715168678767756, 0.07219231536073371},
      {0.01933081871559182, 0.11919477979462598, 0.9505321522496607}};
  static const double kWhite[3] = {kM[0][0] + kM[0][1] + kM[0][2],
                                   kM[1][0] + kM[1][1] + kM[1][2],
                                   kM[2][0] + kM[2][1] + kM[2][2]};
  const double rl = linearize(r8), gl = linearize(g8), bl = linearize(b8);
  double f[3];
  for (int i = 0; i < 3; ++i) {
    const double t = (kM[i][0] * rl + kM[i][1] * gl + kM[i][2] * bl) / kWhite[i];
    constexpr double kEps = 216.0 / 24389.0;
    constexpr double kKappa = 24389.0 / 27.0;
    f[i] = t > kEps ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
  }
  return {116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])};
}

/// Linear-interpolated percentile of a sorted vector, rank q * (n-1).
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double t = rank - static_cast<double>(lo);
  return sorted[lo] * (1.0 - t) + sorted[hi] * t;
}

}  // namespace metric_detail

inline double uciqe(const RgbImage8& img) {
  const std::size_t n = static_cast<std::size_t>(img.h) * img.w;
  std::vector<double> lum(n), chroma(n);
  double sat_sum = 0.0;
  double c_sum = 0.0, c_sq_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto lab = metric_detail::srgb_to_lab(img.pixels[3 * i], img.pixels[3 * i + 1],
                                                img.pixels[3 * i + 2]);
    const double c = std::sqrt(lab.a * lab.a + lab.b * lab.b);
    lum[i] = lab.l;
    chroma[i] = c;
    c_sum += c;
    c_sq_sum += c * c;
    const double denom = std::sqrt(c * c + lab.l * lab.l);
    sat_sum += denom > 0.0 ? c / denom : 0.0;
  }
  const double c_mean = c_sum / static_cast<double>(n);
  const double c_var = std::max(0.0, c_sq_sum / static_cast<double>(n) - c_mean * c_mean);
  std::sort(lum.begin(), lum.end());
  const double con_l =
      (metric_detail::percentile_sorted(lum, 0.99) - metric_detail::percentile_sorted(lum, 0.01)) /
      100.0;
  const double sigma_c = std::sqrt(c_var) / 100.0;
  const double mu_s = sat_sum / static_cast<double>(n);
  return 0.4680 * sigma_c + 0.2745 * con_l + 0.2576 * mu_s;
}

inline MetricReport all_metrics(const RgbImage8& a, const RgbImage8& reference) {
  return MetricReport{psnr(a, reference), ssim(a, reference), uiqm(a), uciqe(a)};
}

}  // namespace aqua
