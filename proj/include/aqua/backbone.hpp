#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aqua/autodiff.hpp"
#include "aqua/illumination.hpp"
#include "aqua/spectral.hpp"

// Hierarchical residual encoder-decoder. Three encoder stages of
// (REM -> stride-2 conv doubling channels), a matching decoder of
// (nearest x2 + conv halving channels -> illumination-weighted skip add
// -> REM), and a tanh-bounded reconstruction conv.

namespace aqua {

/// Depthwise-separable block: per-channel k x k conv, then 1x1 pointwise with
/// bias. Channel-preserving inside the REM.
template <typename T = float>
struct DwsParams {
  Param<T> dw;  // (c, 1, k, k)
  Param<T> pw;  // (c, c, 1, 1)
  Param<T> b;   // (c)
  DwsParams() = default;
  DwsParams(const std::string& name, int c, int k)
      : dw(name + ".dw", Tensor<T>(Shape{c, 1, k, k})),
        pw(name + ".pw", Tensor<T>(Shape{c, c, 1, 1})),
        b(name + ".b", Tensor<T>(Shape{c, 1, 1, 1})) {}
};

/// Residual Enhancement Module: two depthwise-separable blocks, each closed
/// by a residual add (activation only after the first), then a final
/// pointwise conv. All stages preserve the channel count.
template <typename T = float>
struct REMParams {
  DwsParams<T> dws1;
  DwsParams<T> dws2;
  ConvParams<T> out;  // final pointwise (c, c, 1, 1)
  REMParams() = default;
  REMParams(const std::string& name, int c)
      : dws1(name + ".dws1", c, 3), dws2(name + ".dws2", c, 3), out(name + ".out", c, c, 1) {}

  int width() const { return dws1.dw.value.shape().n; }

  /// Sets the final pointwise conv to the identity mix. With zero dws
  /// weights this makes the whole module an exact pass-through.
  void identity_out() {
    out.w.value.fill(T(0));
    const int c = width();
    for (int i = 0; i < c; ++i) out.w.value.at(i, i, 0, 0) = T(1);
    out.b.value.fill(T(0));
  }
};

struct AquaNetConfig {
  int base_channels = 19;
  static constexpr int stages = 3;
  int input_size = 128;
  bool enable_frequency = true;
  bool enable_illumination = true;
  double leaky_slope = 0.2;

  int stage_channels(int k) const { return base_channels << k; }  // C0 * 2^k
};

template <typename T = float>
struct AquaNetParams {
  AquaNetConfig config;
  FrequencyBlockParams<T> freq;  // proj_0 doubles as the stem, always active
  IlluminationParams<T> illum;
  std::array<REMParams<T>, 3> enc_rem;
  std::array<ConvParams<T>, 3> down;  // stride-2, doubling channels
  std::array<ConvParams<T>, 3> up;    // after nearest x2, halving channels
  std::array<REMParams<T>, 3> dec_rem;
  ConvParams<T> recon;  // C0 -> 3

  /// Trainable arrays active under the config flags, in fixed order.
  /// This order defines checkpoint layout and update order.
  std::vector<Param<T>*> all() {
    std::vector<Param<T>*> v;
    auto conv = [&v](ConvParams<T>& c) {
      v.push_back(&c.w);
      v.push_back(&c.b);
    };
    auto dws = [&v](DwsParams<T>& d) {
      v.push_back(&d.dw);
      v.push_back(&d.pw);
      v.push_back(&d.b);
    };
    auto rem = [&](REMParams<T>& r) {
      dws(r.dws1);
      dws(r.dws2);
      conv(r.out);
    };
    conv(freq.proj_0);
    if (config.enable_frequency) {
      conv(freq.w1);
      conv(freq.w2);
      v.push_back(&freq.alpha);
      conv(freq.proj_p);
    }
    if (config.enable_illumination) {
      conv(illum.c1);
      conv(illum.c2);
      conv(illum.c3);
    }
    for (int k = 0; k < 3; ++k) {
      rem(enc_rem[static_cast<std::size_t>(k)]);
      conv(down[static_cast<std::size_t>(k)]);
    }
    for (int k = 2; k >= 0; --k) {
      conv(up[static_cast<std::size_t>(k)]);
      rem(dec_rem[static_cast<std::size_t>(k)]);
    }
    conv(recon);
    return v;
  }

  std::vector<const Param<T>*> all() const {
    auto v = const_cast<AquaNetParams*>(this)->all();
    return {v.begin(), v.end()};
  }

  void zero_grad() {
    for (Param<T>* p : all()) p->zero_grad();
  }
};

/// Allocates every array for the given config (values zero).
template <typename T>
AquaNetParams<T> make_params(const AquaNetConfig& cfg) {
  AquaNetParams<T> p;
  p.config = cfg;
  const int c0 = cfg.base_channels;
  p.freq = FrequencyBlockParams<T>(c0);
  p.freq.leaky_slope = static_cast<T>(cfg.leaky_slope);
  p.illum = IlluminationParams<T>(16);
  p.illum.leaky_slope = static_cast<T>(cfg.leaky_slope);
  for (int k = 0; k < 3; ++k) {
    const int c = cfg.stage_channels(k);
    p.enc_rem[static_cast<std::size_t>(k)] = REMParams<T>("enc.rem" + std::to_string(k + 1), c);
    p.down[static_cast<std::size_t>(k)] =
        ConvParams<T>("enc.down" + std::to_string(k + 1), 2 * c, c, 3);
    p.up[static_cast<std::size_t>(k)] =
        ConvParams<T>("dec.up" + std::to_string(k + 1), c, 2 * c, 3);
    p.dec_rem[static_cast<std::size_t>(k)] = REMParams<T>("dec.rem" + std::to_string(k + 1), c);
  }
  p.recon = ConvParams<T>("dec.out", 3, c0, 3);
  return p;
}

/// Deterministic initialization. Conv weights draw uniform(-b, b) with
/// b = sqrt(1/fan_in) from a counter generator keyed by (seed, array name),
/// biases are zero, alpha starts at 0.1, and each REM's final pointwise conv
/// starts as the identity mix so the residual path dominates early training.
template <typename T>
AquaNetParams<T> init_params(const AquaNetConfig& cfg, std::uint64_t seed) {
  AquaNetParams<T> p = make_params<T>(cfg);
  auto fill_uniform = [seed](Param<T>& prm, int fan_in) {
    const double bound = std::sqrt(1.0 / fan_in);
    CounterRng rng(seed, prm.name);
    for (std::int64_t i = 0; i < prm.value.numel(); ++i) {
      prm.value[i] =
          static_cast<T>(rng.uniform(static_cast<std::uint64_t>(i), -bound, bound));
    }
  };
  auto init_conv = [&](ConvParams<T>& c) {
    const Shape ws = c.w.value.shape();
    fill_uniform(c.w, ws.c * ws.h * ws.w);
    c.b.value.fill(T(0));
  };
  auto init_dws = [&](DwsParams<T>& d) {
    const Shape dws = d.dw.value.shape();
    fill_uniform(d.dw, dws.h * dws.w);  // one input channel per filter
    fill_uniform(d.pw, d.pw.value.shape().c);
    d.b.value.fill(T(0));
  };
  auto init_rem = [&](REMParams<T>& r) {
    init_dws(r.dws1);
    init_dws(r.dws2);
    r.identity_out();
  };
  init_conv(p.freq.proj_0);
  init_conv(p.freq.w1);
  init_conv(p.freq.w2);
  p.freq.alpha.value[0] = T(0.1);
  init_conv(p.freq.proj_p);
  init_conv(p.illum.c1);
  init_conv(p.illum.c2);
  init_conv(p.illum.c3);
  for (int k = 0; k < 3; ++k) {
    init_rem(p.enc_rem[static_cast<std::size_t>(k)]);
    init_conv(p.down[static_cast<std::size_t>(k)]);
    init_conv(p.up[static_cast<std::size_t>(k)]);
    init_rem(p.dec_rem[static_cast<std::size_t>(k)]);
  }
  init_conv(p.recon);
  return p;
}

// ---------------------------------------------------------------------------
// Forward passes.

template <typename T>
Var dws_fwd(Tape<T>& t, Var x, DwsParams<T>& p) {
  Var mid = ad::depthwise_conv(t, x, t.param(p.dw), p.dw.value.shape().h / 2);
  return ad::conv2d(t, mid, t.param(p.pw), t.param(p.b), 1, 0);
}

/// block1 = leaky_relu(dws1(x)) + x; block2 = dws2(block1) + block1;
/// y = pointwise(block2).
template <typename T>
Var rem_fwd(Tape<T>& t, Var x, REMParams<T>& p, T slope) {
  if (t.val(x).shape().c != p.width()) {
    throw ContractError("rem: input has " + std::to_string(t.val(x).shape().c) +
                        " channels, module expects " + std::to_string(p.width()));
  }
  Var b1 = ad::add(t, ad::leaky_relu(t, dws_fwd(t, x, p.dws1), slope), x);
  Var b2 = ad::add(t, dws_fwd(t, b1, p.dws2), b1);
  return ad::conv2d(t, b2, t.param(p.out.w), t.param(p.out.b), 1, 0);
}

template <typename T>
Tensor<T> rem_forward(const Tensor<T>& x, REMParams<T>& p, T slope = T(0.2)) {
  Tape<T> t;
  return t.val(rem_fwd(t, t.constant(x), p, slope));
}

template <typename T>
struct EncoderOut {
  Var bottleneck;           // 8*C0 channels at 1/8 resolution
  std::array<Var, 3> skip;  // REM outputs before each downsampling
};

template <typename T>
EncoderOut<T> encoder_fwd(Tape<T>& t, Var x0, AquaNetParams<T>& p) {
  const T slope = static_cast<T>(p.config.leaky_slope);
  EncoderOut<T> out;
  Var h = x0;
  for (int k = 0; k < 3; ++k) {
    Var s = rem_fwd(t, h, p.enc_rem[static_cast<std::size_t>(k)], slope);
    out.skip[static_cast<std::size_t>(k)] = s;
    h = ad::conv2d(t, s, t.param(p.down[static_cast<std::size_t>(k)].w),
                   t.param(p.down[static_cast<std::size_t>(k)].b), 2, 1);
  }
  out.bottleneck = h;
  return out;
}

/// One decoder level: upsample, add the illumination-weighted skip, refine.
/// When illum is invalid the skip is added unweighted (L == 1 everywhere).
template <typename T>
Var decoder_fwd(Tape<T>& t, Var bottleneck, const std::array<Var, 3>& skip, Var illum,
                AquaNetParams<T>& p) {
  const T slope = static_cast<T>(p.config.leaky_slope);
  Var h = bottleneck;
  for (int k = 2; k >= 0; --k) {
    Var u = ad::nearest_up2(t, h);
    u = ad::conv2d(t, u, t.param(p.up[static_cast<std::size_t>(k)].w),
                   t.param(p.up[static_cast<std::size_t>(k)].b), 1, 1);
    Var s = skip[static_cast<std::size_t>(k)];
    const Shape ss = t.val(s).shape();
    if (t.val(u).shape().h != ss.h || t.val(u).shape().w != ss.w) {
      throw ContractError("decoder: upsampled " + t.val(u).shape().str() +
                          " does not match skip " + ss.str());
    }
    Var fused;
    if (illum.valid()) {
      Var lk = ad::bilinear_to(t, illum, ss.h, ss.w);
      fused = ad::add(t, u, ad::mul(t, s, lk));
    } else {
      fused = ad::add(t, u, s);
    }
    h = rem_fwd(t, fused, p.dec_rem[static_cast<std::size_t>(k)], slope);
  }
  return h;
}

template <typename T>
struct AquaNetOut {
  Var enhanced;  // tanh-bounded reconstruction, shape of the input
  Var illum;     // invalid when the illumination branch is disabled
  Var r_f;       // invalid when the frequency branch is disabled
};

/// Full network under a tape. Input must be in [-1, 1] with spatial dims
/// divisible by 8 (one halving per encoder stage).
template <typename T>
AquaNetOut<T> aquanet_fwd(Tape<T>& t, Var input, AquaNetParams<T>& p) {
  const Shape s = t.val(input).shape();
  if (s.c != 3) throw ContractError("aquanet: input must have 3 channels");
  if (s.h % 8 != 0 || s.w % 8 != 0) {
    throw ContractError("aquanet: spatial dims must be divisible by 8, got " + s.str());
  }
  AquaNetOut<T> out;
  Var x0;
  if (p.config.enable_frequency) {
    FrequencyBlockOut<T> fb = frequency_block_fwd(t, input, p.freq);
    x0 = fb.x0;
    out.r_f = fb.r_f;
  } else {
    x0 = ad::conv2d(t, input, t.param(p.freq.proj_0.w), t.param(p.freq.proj_0.b), 1, 1);
  }
  if (p.config.enable_illumination) {
    out.illum = illumination_fwd(t, input, p.illum);
  }
  EncoderOut<T> enc = encoder_fwd(t, x0, p);
  Var d1 = decoder_fwd(t, enc.bottleneck, enc.skip, out.illum, p);
  out.enhanced = ad::tanh(t, ad::conv2d(t, d1, t.param(p.recon.w), t.param(p.recon.b), 1, 1));
  return out;
}

template <typename T>
struct AquaNetResult {
  Tensor<T> enhanced;
  Tensor<T> illum;  // ones when the branch is disabled
  Tensor<T> r_f;    // zeros when the branch is disabled
};

/// Plain-tensor forward for inference and inspection.
template <typename T>
AquaNetResult<T> aquanet_apply(const Tensor<T>& input, AquaNetParams<T>& p) {
  Tape<T> t;
  AquaNetOut<T> out = aquanet_fwd(t, t.constant(input), p);
  const Shape s = input.shape();
  AquaNetResult<T> r;
  r.enhanced = t.val(out.enhanced);
  r.illum = out.illum.valid() ? t.val(out.illum) : Tensor<T>(Shape{s.n, 1, s.h, s.w}, T(1));
  r.r_f = out.r_f.valid() ? t.val(out.r_f) : Tensor<T>(s);
  return r;
}

// ---------------------------------------------------------------------------
// Budget accounting.

template <typename T>
std::int64_t count_params(const AquaNetParams<T>& p) {
  std::int64_t total = 0;
  for (const Param<T>* q : p.all()) total += q->value.numel();
  return total;
}

/// FLOPs at the given resolution. A multiply-accumulate counts as two
/// operations; convolutions contribute 2*k^2*c_in*c_out*h_out*w_out (c_in = 1
/// per channel for depthwise), each FFT direction 5*HW*log2(HW) per channel.
/// Activations, adds and resampling are not counted.
inline std::int64_t count_flops(const AquaNetConfig& cfg, int h, int w) {
  auto conv = [](std::int64_t k, std::int64_t ci, std::int64_t co, std::int64_t oh,
                 std::int64_t ow) { return 2 * k * k * ci * co * oh * ow; };
  const std::int64_t c0 = cfg.base_channels;
  std::int64_t total = 0;
  auto rem = [&](std::int64_t c, std::int64_t sh, std::int64_t sw) {
    std::int64_t f = 0;
    f += conv(3, 1, c, sh, sw) + conv(1, c, c, sh, sw);  // dws1
    f += conv(3, 1, c, sh, sw) + conv(1, c, c, sh, sw);  // dws2
    f += conv(1, c, c, sh, sw);                          // final pointwise
    return f;
  };
  total += conv(3, 3, c0, h, w);  // stem
  if (cfg.enable_frequency) {
    const double hw = static_cast<double>(h) * w;
    const std::int64_t fft_one = static_cast<std::int64_t>(5.0 * hw * std::log2(hw));
    total += 2 * 3 * fft_one;  // forward + inverse, three channels
    total += conv(3, 3, 8, h, w) + conv(3, 8, 3, h, w);
    total += conv(3, 3, c0, h, w);  // correction-map projection
  }
  if (cfg.enable_illumination) {
    total += conv(3, 3, 16, h, w) + conv(3, 16, 16, h, w) + conv(3, 16, 2, h, w);
  }
  int sh = h, sw = w;
  for (int k = 0; k < 3; ++k) {
    const std::int64_t c = cfg.stage_channels(k);
    total += rem(c, sh, sw);
    sh /= 2;
    sw /= 2;
    total += conv(3, c, 2 * c, sh, sw);  // downsample
  }
  for (int k = 2; k >= 0; --k) {
    const std::int64_t c = cfg.stage_channels(k);
    sh *= 2;
    sw *= 2;
    total += conv(3, 2 * c, c, sh, sw);  // conv after nearest x2
    total += rem(c, sh, sw);
  }
  total += conv(3, c0, 3, h, w);  // reconstruction
  return total;
}

}  // namespace aqua
