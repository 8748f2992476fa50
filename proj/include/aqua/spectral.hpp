#pragma once

#include <utility>

#include "aqua/autodiff.hpp"
#include "aqua/fft.hpp"
#include "aqua/ops.hpp"

// Frequency enhancement block. The input is transformed per channel with the
// orthonormal 2-D FFT, the magnitude spectrum is normalized by its per-channel
// mean, a small conv net predicts a modulation map S in (0,1), and the
// magnitude is scaled by (1 + alpha*S) while the phase is left untouched.
// The inverse transform minus the input yields the correction map, which is
// projected and fused with the stem features.
//
// Phase preservation uses the ratio form: M*/M applied to the complex
// spectrum equals M* e^{jPhi} without computing any angles, and because
// M* = (M/(mu+eps))(1+alpha*S), the ratio collapses to (1+alpha*S)/(mu+eps) —
// the magnitude cancels exactly, eps included.
//
// The modulated ratio is symmetrized across conjugate bin pairs before it
// multiplies the spectrum. The conv net is not equivariant under the DFT's
// point reflection, so without this the enhanced spectrum of a real image
// loses Hermitian symmetry and the inverse transform grows an imaginary part
// far above roundoff. Symmetrizing keeps the ratio strictly positive (phase
// still untouched) and makes the asserted residue a genuine roundoff check.

namespace aqua {

template <typename T = float>
struct ConvParams {
  Param<T> w;
  Param<T> b;
  ConvParams() = default;
  ConvParams(const std::string& name, int c_out, int c_in, int k)
      : w(name + ".w", Tensor<T>(Shape{c_out, c_in, k, k})),
        b(name + ".b", Tensor<T>(Shape{c_out, 1, 1, 1})) {}
};

template <typename T = float>
struct FrequencyBlockParams {
  ConvParams<T> w1;      // modulation net, 3 -> 8
  ConvParams<T> w2;      // modulation net, 8 -> 3
  Param<T> alpha;        // scalar scaling coefficient, shared across channels
  ConvParams<T> proj_p;  // correction-map projection, 3 -> C0
  ConvParams<T> proj_0;  // stem projection, 3 -> C0
  T eps = T(1e-8);       // magnitude-normalization guard
  T eps_mag = T(1e-12);  // inside the magnitude square root
  T leaky_slope = T(0.2);

  FrequencyBlockParams() = default;
  FrequencyBlockParams(int base_channels, int mod_hidden = 8)
      : w1("freq.mod1", mod_hidden, 3, 3),
        w2("freq.mod2", 3, mod_hidden, 3),
        alpha("freq.alpha", Tensor<T>(Shape{1, 1, 1, 1})),
        proj_p("freq.proj", base_channels, 3, 3),
        proj_0("enc.stem", base_channels, 3, 3) {}
};

// ---------------------------------------------------------------------------
// Plain-tensor operations (the unit-test surface).

/// Magnitude M = sqrt(re^2 + im^2 + eps_mag) and the unit spectrum
/// (re/M, im/M) standing in for e^{jPhi}.
template <typename T>
std::pair<Tensor<T>, ComplexSpectrum<T>> magnitude_phase(const ComplexSpectrum<T>& spec,
                                                         T eps_mag) {
  if (!(eps_mag > T(0))) throw ContractError("magnitude_phase: eps_mag must be positive");
  Tensor<T> m(spec.re.shape());
  ComplexSpectrum<T> unit{Tensor<T>(spec.re.shape()), Tensor<T>(spec.re.shape())};
  for (std::int64_t i = 0; i < m.numel(); ++i) {
    const T mag = std::sqrt(spec.re[i] * spec.re[i] + spec.im[i] * spec.im[i] + eps_mag);
    m[i] = mag;
    unit.re[i] = spec.re[i] / mag;
    unit.im[i] = spec.im[i] / mag;
  }
  return {std::move(m), std::move(unit)};
}

/// M / (mu + eps) with mu the per-channel spatial mean of M.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> normalize_magnitude(const Tensor<T>& m, T eps) {
  Tensor<T> mu = ops::channel_mean(m);
  return {ops::div_channel(m, mu, eps), std::move(mu)};
}

/// S = sigmoid(W2 * leaky_relu(W1 * M_norm)); same shape as the input.
template <typename T>
Tensor<T> modulation_map(const Tensor<T>& m_norm, const FrequencyBlockParams<T>& p) {
  Tensor<T> h = ops::conv2d(m_norm, p.w1.w.value, p.w1.b.value, 1, p.w1.w.value.shape().h / 2);
  h = ops::leaky_relu(h, p.leaky_slope);
  h = ops::conv2d(h, p.w2.w.value, p.w2.b.value, 1, p.w2.w.value.shape().h / 2);
  return ops::sigmoid(h);
}

/// M* = M_norm (1 + alpha S).
template <typename T>
Tensor<T> enhance_magnitude(const Tensor<T>& m_norm, const Tensor<T>& s, T alpha) {
  if (!(m_norm.shape() == s.shape())) {
    throw ContractError("enhance_magnitude: shape mismatch " + m_norm.shape().str() + " vs " +
                        s.shape().str());
  }
  Tensor<T> out(m_norm.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = m_norm[i] * (T(1) + alpha * s[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Tape-recorded block.

template <typename T>
struct FrequencyBlockOut {
  Var x0;   // fused encoder input, C0 channels
  Var r_f;  // correction map, 3 channels
};

/// Correction map R_f = real(ifft(sym((1+alpha S)/(mu+eps)) . spec)) - I.
template <typename T>
Var frequency_correction_fwd(Tape<T>& t, Var input, FrequencyBlockParams<T>& p,
                             double max_imag = 1e-4) {
  auto [re, im] = ad::fft2d(t, input);
  Var mag = ad::complex_magnitude(t, re, im, p.eps_mag);
  Var mu = ad::channel_mean(t, mag);
  Var m_norm = ad::div_channel(t, mag, mu, p.eps);
  Var h = ad::conv2d(t, m_norm, t.param(p.w1.w), t.param(p.w1.b), 1, p.w1.w.value.shape().h / 2);
  h = ad::leaky_relu(t, h, p.leaky_slope);
  h = ad::conv2d(t, h, t.param(p.w2.w), t.param(p.w2.b), 1, p.w2.w.value.shape().h / 2);
  Var s = ad::sigmoid(t, h);
  Var gain = ad::one_plus_scaled(t, s, t.param(p.alpha));
  Var ratio = ad::div_channel(t, gain, mu, p.eps);
  Var ratio_sym = ad::hermitian_symmetrize(t, ratio);
  Var er = ad::mul(t, re, ratio_sym);
  Var ei = ad::mul(t, im, ratio_sym);
  Var recon = ad::ifft2d_real(t, er, ei, max_imag);
  return ad::sub(t, recon, input);
}

/// X0 = proj_p(R_f) + proj_0(I); runs the whole block under the tape.
template <typename T>
FrequencyBlockOut<T> frequency_block_fwd(Tape<T>& t, Var input, FrequencyBlockParams<T>& p,
                                         double max_imag = 1e-4) {
  Var r_f = frequency_correction_fwd(t, input, p, max_imag);
  Var a = ad::conv2d(t, r_f, t.param(p.proj_p.w), t.param(p.proj_p.b), 1, 1);
  Var b = ad::conv2d(t, input, t.param(p.proj_0.w), t.param(p.proj_0.b), 1, 1);
  return {ad::add(t, a, b), r_f};
}

/// Plain-tensor wrapper for the correction map.
template <typename T>
Tensor<T> frequency_correction(const Tensor<T>& input, FrequencyBlockParams<T>& p,
                               double max_imag = 1e-4) {
  if (input.shape().c != 3) throw ContractError("frequency_correction: input must have 3 channels");
  Tape<T> t;
  Var v = frequency_correction_fwd(t, t.constant(input), p, max_imag);
  return t.val(v);
}

/// Plain-tensor fusion: conv(R_f; proj_p) + conv(I; proj_0).
template <typename T>
Tensor<T> fuse_input(const Tensor<T>& input, const Tensor<T>& r_f,
                     const FrequencyBlockParams<T>& p) {
  if (!(input.shape() == r_f.shape())) {
    throw ContractError("fuse_input: shape mismatch " + input.shape().str() + " vs " +
                        r_f.shape().str());
  }
  Tensor<T> a = ops::conv2d(r_f, p.proj_p.w.value, p.proj_p.b.value, 1, 1);
  Tensor<T> b = ops::conv2d(input, p.proj_0.w.value, p.proj_0.b.value, 1, 1);
  return ops::add(a, b);
}

}  // namespace aqua
