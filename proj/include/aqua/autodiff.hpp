#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aqua/fft.hpp"
#include "aqua/ops.hpp"
#include "aqua/tensor.hpp"

namespace aqua {

/// A named trainable array with its gradient accumulator.
template <typename T = float>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  Param(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(T(0)); }
};

struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

/// Ordered record of executed differentiable operations. Execution order is a
/// topological order of the graph, so the backward sweep simply replays the
/// node list in reverse. One backward pass adds each bound parameter's
/// accumulated gradient into Param::grad; calling it again accumulates again.
template <typename T = float>
class Tape {
 public:
  using PullFn = std::function<void(Tape&)>;

  Var constant(Tensor<T> v, std::string_view op = "const") { return push(std::move(v), op); }

  /// Leaf node bound to a parameter. A parameter registered twice on the same
  /// tape shares one node, so fan-out is handled by grad accumulation.
  Var param(Param<T>& p) {
    auto it = param_vars_.find(&p);
    if (it != param_vars_.end()) return it->second;
    Var v = push(p.value, p.name);
    param_vars_.emplace(&p, v);
    bindings_.emplace_back(v.id, &p);
    return v;
  }

  Var push(Tensor<T> value, std::string_view op) {
    if (check_finite_ && !ops::all_finite(value)) {
      throw InternalError("non-finite value produced by op '" + std::string(op) + "'");
    }
    nodes_.push_back(Node{std::move(value), Tensor<T>(), nullptr, std::string(op)});
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  void set_pull(Var v, PullFn fn) { nodes_[checked(v)].pull = std::move(fn); }

  const Tensor<T>& val(Var v) const { return nodes_[checked(v)].value; }

  Tensor<T>& grad(Var v) {
    Node& n = nodes_[checked(v)];
    if (n.grad.numel() == 0) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  const std::string& op_name(Var v) const { return nodes_[checked(v)].op; }
  std::size_t size() const { return nodes_.size(); }

  /// When enabled, every pushed value is scanned for NaN/Inf and the
  /// offending operation is named in the error. Used by grad_check.
  void check_finite(bool on) { check_finite_ = on; }

  void backward(Var loss) {
    const Node& ln = nodes_[checked(loss)];
    if (ln.value.numel() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " + ln.value.shape().str());
    }
    for (Node& n : nodes_) {
      if (n.grad.numel() != 0) n.grad.fill(T(0));
    }
    grad(loss)[0] = T(1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (n.pull && n.grad.numel() != 0) n.pull(*this);
    }
    for (auto& [id, p] : bindings_) {
      const Tensor<T>& g = nodes_[static_cast<std::size_t>(id)].grad;
      if (g.numel() == 0) continue;
      for (std::int64_t i = 0; i < g.numel(); ++i) p->grad[i] += g[i];
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily; empty means untouched
    PullFn pull;
    std::string op;
  };

  std::size_t checked(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
      throw ContractError("invalid tape handle");
    }
    return static_cast<std::size_t>(v.id);
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<std::int32_t, Param<T>*>> bindings_;
  std::unordered_map<const Param<T>*, Var> param_vars_;
  bool check_finite_ = false;
};

// ---------------------------------------------------------------------------
// Tape-recorded operations. Each computes its value through the ops:: kernel
// and registers the adjoint as a closure over node ids.

namespace ad {

template <typename T>
Var conv2d(Tape<T>& t, Var x, Var w, Var b, int stride = 1, int pad = 0) {
  Var y = t.push(ops::conv2d(t.val(x), t.val(w), t.val(b), stride, pad), "conv2d");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    ops::conv2d_backward_input(tp.grad(x), tp.val(w), g, stride, pad);
    ops::conv2d_backward_weight(tp.grad(w), tp.val(x), g, stride, pad);
    ops::conv2d_backward_bias(tp.grad(b), g);
  });
  return y;
}

template <typename T>
Var depthwise_conv(Tape<T>& t, Var x, Var w, int pad) {
  Var y = t.push(ops::depthwise_conv(t.val(x), t.val(w), pad), "depthwise_conv");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    ops::depthwise_backward_input(tp.grad(x), tp.val(w), g, pad);
    ops::depthwise_backward_weight(tp.grad(w), tp.val(x), g, pad);
  });
  return y;
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  Var y = t.push(ops::add(t.val(a), t.val(b)), "add");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    ops::reduce_to_operand(tp.grad(a), g);
    ops::reduce_to_operand(tp.grad(b), g);
  });
  return y;
}

template <typename T>
Var sub(Tape<T>& t, Var a, Var b) {
  Var y = t.push(ops::sub(t.val(a), t.val(b)), "sub");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    ops::reduce_to_operand(tp.grad(a), g);
    Tensor<T> neg = ops::scale(g, T(-1));
    ops::reduce_to_operand(tp.grad(b), neg);
  });
  return y;
}

/// Elementwise product; b may be single-channel, broadcast across a's channels.
template <typename T>
Var mul(Tape<T>& t, Var a, Var b) {
  Var y = t.push(ops::mul(t.val(a), t.val(b)), "mul");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    Tensor<T> ga = ops::mul(g, tp.val(b));  // broadcast matches forward
    ops::reduce_to_operand(tp.grad(a), ga);
    Tensor<T> gb = ops::mul(g, tp.val(a));
    ops::reduce_to_operand(tp.grad(b), gb);
  });
  return y;
}

template <typename T>
Var leaky_relu(Tape<T>& t, Var x, T slope) {
  Var y = t.push(ops::leaky_relu(t.val(x), slope), "leaky_relu");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    const Tensor<T>& xv = tp.val(x);
    Tensor<T>& gx = tp.grad(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      gx[i] += xv[i] >= T(0) ? g[i] : slope * g[i];
    }
  });
  return y;
}

template <typename T>
Var sigmoid(Tape<T>& t, Var x) {
  Var y = t.push(ops::sigmoid(t.val(x)), "sigmoid");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    const Tensor<T>& yv = tp.val(y);
    Tensor<T>& gx = tp.grad(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * yv[i] * (T(1) - yv[i]);
  });
  return y;
}

template <typename T>
Var tanh(Tape<T>& t, Var x) {
  Var y = t.push(ops::tanh(t.val(x)), "tanh");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    const Tensor<T>& yv = tp.val(y);
    Tensor<T>& gx = tp.grad(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * (T(1) - yv[i] * yv[i]);
  });
  return y;
}

template <typename T>
Var clamp(Tape<T>& t, Var x, T lo, T hi) {
  const Tensor<T>& xv = t.val(x);
  Tensor<T> v(xv.shape());
  for (std::int64_t i = 0; i < xv.numel(); ++i) v[i] = std::clamp(xv[i], lo, hi);
  Var y = t.push(std::move(v), "clamp");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    const Tensor<T>& in = tp.val(x);
    Tensor<T>& gx = tp.grad(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      if (in[i] > lo && in[i] < hi) gx[i] += g[i];
    }
  });
  return y;
}

template <typename T>
Var nearest_up2(Tape<T>& t, Var x) {
  Var y = t.push(ops::nearest_up2(t.val(x)), "nearest_up2");
  t.set_pull(y, [=](Tape<T>& tp) { ops::nearest_up2_backward(tp.grad(x), tp.grad(y)); });
  return y;
}

template <typename T>
Var bilinear_to(Tape<T>& t, Var x, int oh, int ow) {
  Var y = t.push(ops::bilinear_resize(t.val(x), oh, ow), "bilinear_to");
  t.set_pull(y, [=](Tape<T>& tp) { ops::bilinear_resize_backward(tp.grad(x), tp.grad(y)); });
  return y;
}

/// View of one channel as a (n,1,h,w) tensor.
template <typename T>
Var slice_channel(Tape<T>& t, Var x, int ch) {
  const Tensor<T>& xv = t.val(x);
  const Shape s = xv.shape();
  if (ch < 0 || ch >= s.c) throw ContractError("slice_channel: channel out of range");
  Tensor<T> v(Shape{s.n, 1, s.h, s.w});
  const std::int64_t hw = static_cast<std::int64_t>(s.h) * s.w;
  for (int in = 0; in < s.n; ++in) {
    const T* src = xv.plane(in, ch);
    T* dst = v.plane(in, 0);
    for (std::int64_t i = 0; i < hw; ++i) dst[i] = src[i];
  }
  Var y = t.push(std::move(v), "slice_channel");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    Tensor<T>& gx = tp.grad(x);
    const Shape gs = gx.shape();
    const std::int64_t hw2 = static_cast<std::int64_t>(gs.h) * gs.w;
    for (int in = 0; in < gs.n; ++in) {
      T* dst = gx.plane(in, ch);
      const T* src = g.plane(in, 0);
      for (std::int64_t i = 0; i < hw2; ++i) dst[i] += src[i];
    }
  });
  return y;
}

template <typename T>
Var channel_mean(Tape<T>& t, Var x) {
  Var y = t.push(ops::channel_mean(t.val(x)), "channel_mean");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    Tensor<T>& gx = tp.grad(x);
    const Shape s = gx.shape();
    const std::int64_t hw = static_cast<std::int64_t>(s.h) * s.w;
    for (int in = 0; in < s.n; ++in) {
      for (int ic = 0; ic < s.c; ++ic) {
        const T gv = g.at(in, ic, 0, 0) / static_cast<T>(hw);
        T* p = gx.plane(in, ic);
        for (std::int64_t i = 0; i < hw; ++i) p[i] += gv;
      }
    }
  });
  return y;
}

/// y = x / (s + eps), s of shape (n,c,1,1).
template <typename T>
Var div_channel(Tape<T>& t, Var x, Var s, T eps) {
  Var y = t.push(ops::div_channel(t.val(x), t.val(s), eps), "div_channel");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    const Tensor<T>& xv = tp.val(x);
    const Tensor<T>& sv = tp.val(s);
    Tensor<T>& gx = tp.grad(x);
    Tensor<T>& gs = tp.grad(s);
    const Shape sh = xv.shape();
    const std::int64_t hw = static_cast<std::int64_t>(sh.h) * sh.w;
    for (int in = 0; in < sh.n; ++in) {
      for (int ic = 0; ic < sh.c; ++ic) {
        const T d = sv.at(in, ic, 0, 0) + eps;
        const T* gp = g.plane(in, ic);
        const T* xp = xv.plane(in, ic);
        T* gxp = gx.plane(in, ic);
        T acc = 0;
        for (std::int64_t i = 0; i < hw; ++i) {
          gxp[i] += gp[i] / d;
          acc += gp[i] * xp[i];
        }
        gs.at(in, ic, 0, 0) += -acc / (d * d);
      }
    }
  });
  return y;
}

/// m = sqrt(re^2 + im^2 + eps); strictly positive, smooth everywhere.
template <typename T>
Var complex_magnitude(Tape<T>& t, Var re, Var im, T eps) {
  const Tensor<T>& r = t.val(re);
  const Tensor<T>& i2 = t.val(im);
  Tensor<T> m(r.shape());
  for (std::int64_t i = 0; i < r.numel(); ++i) {
    m[i] = std::sqrt(r[i] * r[i] + i2[i] * i2[i] + eps);
  }
  Var y = t.push(std::move(m), "complex_magnitude");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    const Tensor<T>& mv = tp.val(y);
    const Tensor<T>& rv = tp.val(re);
    const Tensor<T>& iv = tp.val(im);
    Tensor<T>& gr = tp.grad(re);
    Tensor<T>& gi = tp.grad(im);
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      const T s = g[i] / mv[i];
      gr[i] += s * rv[i];
      gi[i] += s * iv[i];
    }
  });
  return y;
}

/// y = 1 + alpha * x with alpha a one-element parameter node.
template <typename T>
Var one_plus_scaled(Tape<T>& t, Var x, Var alpha) {
  if (t.val(alpha).numel() != 1) throw ContractError("one_plus_scaled: alpha must be scalar");
  const T a = t.val(alpha)[0];
  Tensor<T> v = ops::add_scalar(ops::scale(t.val(x), a), T(1));
  Var y = t.push(std::move(v), "one_plus_scaled");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& g = tp.grad(y);
    const Tensor<T>& xv = tp.val(x);
    const T av = tp.val(alpha)[0];
    Tensor<T>& gx = tp.grad(x);
    T acc = 0;
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      gx[i] += av * g[i];
      acc += g[i] * xv[i];
    }
    tp.grad(alpha)[0] += acc;
  });
  return y;
}

/// Averages each value with the one at the conjugate DFT index
/// (u,v) -> ((H-u) mod H, (W-v) mod W). Linear and self-adjoint.
template <typename T>
inline Tensor<T> hermitian_symmetrize_value(const Tensor<T>& x) {
  const Shape s = x.shape();
  Tensor<T> y(s);
  for (int in = 0; in < s.n; ++in) {
    for (int ic = 0; ic < s.c; ++ic) {
      const T* xp = x.plane(in, ic);
      T* yp = y.plane(in, ic);
      for (int u = 0; u < s.h; ++u) {
        const int ur = (s.h - u) % s.h;
        for (int v = 0; v < s.w; ++v) {
          const int vr = (s.w - v) % s.w;
          const std::int64_t a = static_cast<std::int64_t>(u) * s.w + v;
          const std::int64_t b = static_cast<std::int64_t>(ur) * s.w + vr;
          yp[a] = (xp[a] + xp[b]) / T(2);
        }
      }
    }
  }
  return y;
}

template <typename T>
Var hermitian_symmetrize(Tape<T>& t, Var x) {
  Var y = t.push(hermitian_symmetrize_value(t.val(x)), "hermitian_symmetrize");
  t.set_pull(y, [=](Tape<T>& tp) {
    Tensor<T> g = hermitian_symmetrize_value(tp.grad(y));
    Tensor<T>& gx = tp.grad(x);
    for (std::int64_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
  });
  return y;
}

/// Forward orthonormal 2-D transform of a real tensor -> (re, im) nodes.
/// The adjoint of the real-to-complex map is the real part of the inverse
/// transform applied to the (re, im) gradient pair.
template <typename T>
std::pair<Var, Var> fft2d(Tape<T>& t, Var x) {
  ComplexSpectrum<T> spec = fft2d_ortho(t.val(x));
  Var re = t.push(std::move(spec.re), "fft2d.re");
  Var im = t.push(std::move(spec.im), "fft2d.im");
  // Both output nodes pull through one closure; attach it to the later node
  // so both gradients are complete when it runs. Preallocate the grads so the
  // pull fires even when only one half is consumed downstream.
  t.grad(re);
  t.grad(im);
  t.set_pull(im, [=](Tape<T>& tp) {
    ComplexSpectrum<T> g{tp.grad(re), tp.grad(im)};
    ComplexSpectrum<T> back = ifft2d_ortho(g);
    Tensor<T>& gx = tp.grad(x);
    for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += back.re[i];
  });
  return {re, im};
}

/// Real part of the inverse orthonormal transform. The imaginary residue is
/// asserted below max_imag. Adjoint: forward transform of the gradient.
template <typename T>
Var ifft2d_real(Tape<T>& t, Var re, Var im, double max_imag) {
  ComplexSpectrum<T> spec{t.val(re), t.val(im)};
  Var y = t.push(ifft2d_ortho_real(spec, max_imag), "ifft2d_real");
  t.set_pull(y, [=](Tape<T>& tp) {
    ComplexSpectrum<T> g = fft2d_ortho(tp.grad(y));
    Tensor<T>& gr = tp.grad(re);
    Tensor<T>& gi = tp.grad(im);
    for (std::int64_t i = 0; i < gr.numel(); ++i) {
      gr[i] += g.re[i];
      gi[i] += g.im[i];
    }
  });
  return y;
}

template <typename T>
Var sum(Tape<T>& t, Var x) {
  Tensor<T> v(Shape{1, 1, 1, 1});
  v[0] = ops::sum_all(t.val(x));
  Var y = t.push(std::move(v), "sum");
  t.set_pull(y, [=](Tape<T>& tp) {
    const T g = tp.grad(y)[0];
    Tensor<T>& gx = tp.grad(x);
    for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
  return y;
}

/// Mean absolute difference; the subgradient at zero is taken as zero.
template <typename T>
Var l1_loss(Tape<T>& t, Var a, Var b) {
  Tensor<T> v(Shape{1, 1, 1, 1});
  v[0] = ops::mean_abs_diff(t.val(a), t.val(b));
  Var y = t.push(std::move(v), "l1_loss");
  t.set_pull(y, [=](Tape<T>& tp) {
    const Tensor<T>& av = tp.val(a);
    const Tensor<T>& bv = tp.val(b);
    const T g = tp.grad(y)[0] / static_cast<T>(av.numel());
    Tensor<T>& ga = tp.grad(a);
    Tensor<T>& gb = tp.grad(b);
    for (std::int64_t i = 0; i < av.numel(); ++i) {
      const T d = av[i] - bv[i];
      const T s = d > T(0) ? g : (d < T(0) ? -g : T(0));
      ga[i] += s;
      gb[i] -= s;
    }
  });
  return y;
}

}  // namespace ad

// ---------------------------------------------------------------------------

/// Compares analytic gradients against central finite differences.
/// Returns max over checked coordinates of
/// |analytic - numeric| / max(1, |analytic|).
/// coords_per_param == 0 checks every coordinate. Meaningful only for
/// T = double; float steps drown in rounding noise.
template <typename T>
T grad_check(const std::function<Var(Tape<T>&)>& build,
             const std::vector<Param<T>*>& params, T eps,
             std::int64_t coords_per_param = 0) {
  if (!(eps > T(0))) throw ContractError("grad_check: eps must be positive");
  for (Param<T>* p : params) p->zero_grad();
  T worst = 0;
  {
    Tape<T> t;
    t.check_finite(true);
    Var loss = build(t);
    t.backward(loss);
  }
  auto eval = [&]() -> T {
    Tape<T> t;
    t.check_finite(true);
    Var loss = build(t);
    return t.val(loss)[0];
  };
  CounterRng pick(0x5eed, "grad_check");
  std::uint64_t ctr = 0;
  for (Param<T>* p : params) {
    const std::int64_t total = p->value.numel();
    const std::int64_t count =
        (coords_per_param == 0) ? total : std::min<std::int64_t>(coords_per_param, total);
    for (std::int64_t j = 0; j < count; ++j) {
      const std::int64_t i =
          (coords_per_param == 0)
              ? j
              : static_cast<std::int64_t>(pick.below(ctr++, static_cast<std::uint64_t>(total)));
      const T saved = p->value[i];
      p->value[i] = saved + eps;
      const T fp = eval();
      p->value[i] = saved - eps;
      const T fm = eval();
      p->value[i] = saved;
      const T numeric = (fp - fm) / (2 * eps);
      const T analytic = p->grad[i];
      const T rel = std::abs(analytic - numeric) / std::max(T(1), std::abs(analytic));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace aqua
