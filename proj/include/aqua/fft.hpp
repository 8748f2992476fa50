#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numbers>
#include <unordered_map>
#include <vector>

#include "aqua/errors.hpp"
#include "aqua/tensor.hpp"

namespace aqua {

/// Paired real/imaginary planes per channel; carrier for 2-D spectra.
template <typename T = float>
struct ComplexSpectrum {
  Tensor<T> re;
  Tensor<T> im;

  const Shape& shape() const { return re.shape(); }
};

namespace fft_detail {

using cd = std::complex<double>;

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// One-dimensional transform plan for a fixed length. Power-of-two lengths
/// use iterative radix-2; anything else goes through Bluestein's chirp-z
/// reduction onto a power-of-two convolution. Twiddles are computed once in
/// double precision and are immutable afterwards, so plans can be shared
/// across threads.
class Fft1d {
 public:
  explicit Fft1d(int n) : n_(n) {
    if (n < 1) throw ContractError("fft: length must be >= 1");
    if (is_pow2(n)) {
      build_pow2_tables(n, tw_fwd_, tw_inv_, rev_);
    } else {
      m_ = next_pow2(2 * n - 1);
      build_pow2_tables(m_, tw_fwd_, tw_inv_, rev_);
      // chirp_[k] = exp(-i*pi*k^2/n); k^2 is reduced mod 2n to keep the
      // angle argument small for large k.
      chirp_.resize(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k) {
        const std::int64_t q = (static_cast<std::int64_t>(k) * k) % (2 * n);
        const double ang = -std::numbers::pi * static_cast<double>(q) / n;
        chirp_[static_cast<std::size_t>(k)] = cd(std::cos(ang), std::sin(ang));
      }
      // Forward-transformed kernel b[j] = conj(chirp[|j|]) wrapped to length m.
      std::vector<cd> b(static_cast<std::size_t>(m_), cd(0, 0));
      for (int j = 0; j < n; ++j) {
        b[static_cast<std::size_t>(j)] = std::conj(chirp_[static_cast<std::size_t>(j)]);
        if (j != 0) b[static_cast<std::size_t>(m_ - j)] = std::conj(chirp_[static_cast<std::size_t>(j)]);
      }
      pow2(b.data(), m_, false);
      bhat_ = std::move(b);
    }
  }

  int length() const { return n_; }

  /// In-place unnormalized DFT of length n. inverse=true conjugates the
  /// twiddles (no 1/n factor is applied here).
  void transform(cd* a, bool inverse) const {
    if (m_ == 0) {
      pow2(a, n_, inverse);
      return;
    }
    bluestein(a, inverse);
  }

 private:
  static void build_pow2_tables(int n, std::vector<cd>& fwd, std::vector<cd>& inv,
                                std::vector<std::uint32_t>& rev) {
    fwd.resize(static_cast<std::size_t>(n / 2 > 0 ? n / 2 : 1));
    inv.resize(fwd.size());
    for (int i = 0; i < n / 2; ++i) {
      const double ang = -2.0 * std::numbers::pi * i / n;
      fwd[static_cast<std::size_t>(i)] = cd(std::cos(ang), std::sin(ang));
      inv[static_cast<std::size_t>(i)] = std::conj(fwd[static_cast<std::size_t>(i)]);
    }
    rev.resize(static_cast<std::size_t>(n));
    int lg = 0;
    while ((1 << lg) < n) ++lg;
    for (int i = 0; i < n; ++i) {
      std::uint32_t r = 0;
      for (int b = 0; b < lg; ++b) {
        if (i & (1 << b)) r |= 1u << (lg - 1 - b);
      }
      rev[static_cast<std::size_t>(i)] = r;
    }
  }

  void pow2(cd* a, int n, bool inverse) const {
    const auto& tw = inverse ? tw_inv_ : tw_fwd_;
    for (int i = 0; i < n; ++i) {
      const int j = static_cast<int>(rev_[static_cast<std::size_t>(i)]);
      if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
      const int half = len >> 1;
      const int step = n / len;
      for (int blk = 0; blk < n; blk += len) {
        for (int j = 0; j < half; ++j) {
          const cd w = tw[static_cast<std::size_t>(j * step)];
          const cd u = a[blk + j];
          const cd v = a[blk + j + half] * w;
          a[blk + j] = u + v;
          a[blk + j + half] = u - v;
        }
      }
    }
  }

  void bluestein(cd* a, bool inverse) const {
    const int n = n_;
    std::vector<cd> x(static_cast<std::size_t>(m_), cd(0, 0));
    for (int j = 0; j < n; ++j) {
      const cd c = inverse ? std::conj(chirp_[static_cast<std::size_t>(j)])
                           : chirp_[static_cast<std::size_t>(j)];
      x[static_cast<std::size_t>(j)] = a[j] * c;
    }
    pow2(x.data(), m_, false);
    if (inverse) {
      // Kernel for conjugated chirp equals conj(bhat at mirrored index).
      std::vector<cd> prod(static_cast<std::size_t>(m_));
      prod[0] = x[0] * std::conj(bhat_[0]);
      for (int j = 1; j < m_; ++j) {
        prod[static_cast<std::size_t>(j)] =
            x[static_cast<std::size_t>(j)] * std::conj(bhat_[static_cast<std::size_t>(m_ - j)]);
      }
      x = std::move(prod);
    } else {
      for (int j = 0; j < m_; ++j) x[static_cast<std::size_t>(j)] *= bhat_[static_cast<std::size_t>(j)];
    }
    pow2(x.data(), m_, true);
    const double inv_m = 1.0 / m_;
    for (int k = 0; k < n; ++k) {
      const cd c = inverse ? std::conj(chirp_[static_cast<std::size_t>(k)])
                           : chirp_[static_cast<std::size_t>(k)];
      a[k] = x[static_cast<std::size_t>(k)] * inv_m * c;
    }
  }

  int n_;
  int m_ = 0;  // 0 => direct power-of-two path
  std::vector<cd> tw_fwd_, tw_inv_;
  std::vector<std::uint32_t> rev_;
  std::vector<cd> chirp_;
  std::vector<cd> bhat_;
};

inline std::shared_ptr<const Fft1d> plan(int n) {
  static std::mutex mu;
  static std::unordered_map<int, std::shared_ptr<const Fft1d>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto p = std::make_shared<const Fft1d>(n);
  cache.emplace(n, p);
  return p;
}

/// Unnormalized 2-D DFT of one plane held in buf (row-major h x w).
inline void dft2d_plane(cd* buf, int h, int w, bool inverse) {
  const auto pw = plan(w);
  for (int y = 0; y < h; ++y) pw->transform(buf + static_cast<std::int64_t>(y) * w, inverse);
  const auto ph = plan(h);
  std::vector<cd> col(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[static_cast<std::size_t>(y)] = buf[static_cast<std::int64_t>(y) * w + x];
    ph->transform(col.data(), inverse);
    for (int y = 0; y < h; ++y) buf[static_cast<std::int64_t>(y) * w + x] = col[static_cast<std::size_t>(y)];
  }
}

}  // namespace fft_detail

/// Orthonormal 2-D transform of complex input, applied per (image, channel)
/// plane. Both directions scale by 1/sqrt(HW), so each is the exact inverse
/// of the other. Internals run in double regardless of T.
template <typename T>
ComplexSpectrum<T> fft2d_ortho_complex(const Tensor<T>& re, const Tensor<T>& im, bool inverse) {
  const Shape s = re.shape();
  if (!(s == im.shape())) throw ContractError("fft2d: re/im shapes differ");
  ComplexSpectrum<T> out{Tensor<T>(s), Tensor<T>(s)};
  const double norm = 1.0 / std::sqrt(static_cast<double>(s.h) * s.w);
  std::vector<fft_detail::cd> buf(static_cast<std::size_t>(s.h) * s.w);
  for (int in = 0; in < s.n; ++in) {
    for (int ic = 0; ic < s.c; ++ic) {
      const T* pr = re.plane(in, ic);
      const T* pi = im.plane(in, ic);
      for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = fft_detail::cd(pr[i], pi[i]);
      fft_detail::dft2d_plane(buf.data(), s.h, s.w, inverse);
      T* qr = out.re.plane(in, ic);
      T* qi = out.im.plane(in, ic);
      for (std::size_t i = 0; i < buf.size(); ++i) {
        qr[i] = static_cast<T>(buf[i].real() * norm);
        qi[i] = static_cast<T>(buf[i].imag() * norm);
      }
    }
  }
  return out;
}

/// Forward orthonormal transform of a real tensor.
template <typename T>
ComplexSpectrum<T> fft2d_ortho(const Tensor<T>& x) {
  Tensor<T> zero(x.shape());
  return fft2d_ortho_complex(x, zero, false);
}

template <typename T>
ComplexSpectrum<T> ifft2d_ortho(const ComplexSpectrum<T>& spec) {
  return fft2d_ortho_complex(spec.re, spec.im, true);
}

/// Inverse transform of a spectrum that should describe a real image.
/// Throws if the imaginary residue exceeds max_imag; returns the real part.
template <typename T>
Tensor<T> ifft2d_ortho_real(const ComplexSpectrum<T>& spec, double max_imag) {
  ComplexSpectrum<T> full = ifft2d_ortho(spec);
  double m = 0.0;
  for (std::int64_t i = 0; i < full.im.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(full.im[i])));
  }
  if (m >= max_imag) {
    throw InternalError("inverse transform imaginary residue " + std::to_string(m) +
                        " exceeds " + std::to_string(max_imag));
  }
  return std::move(full.re);
}

}  // namespace aqua
