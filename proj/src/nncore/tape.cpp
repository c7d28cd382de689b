#include <cmath>
#include <complex>
#include <stdexcept>

#include "postgan/fft.hpp"
#include "postgan/nncore.hpp"

namespace postgan::nn {

template <class S>
Var Tape<S>::push(Tensor<S> value, bool requires_grad, std::function<void()> back) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return static_cast<Var>(nodes_.size() - 1);
}

template <class S>
const Tensor<S>& Tape<S>::grad(Var v) const {
  const Node& n = nodes_[static_cast<size_t>(v)];
  if (n.grad.data.empty()) throw std::logic_error("Tape: gradient not computed for node");
  return n.grad;
}

template <class S>
void Tape<S>::accumulate(Var v, const Tensor<S>& g) {
  Node& n = nodes_[static_cast<size_t>(v)];
  if (!n.requires_grad) return;
  if (n.grad.data.empty()) n.grad = Tensor<S>(n.value.shape);
  for (size_t i = 0; i < g.data.size(); ++i) n.grad.data[i] += g.data[i];
}

template <class S>
Var Tape<S>::leaf(Tensor<S> value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

template <class S>
Var Tape<S>::param(const WeightStore<S>& store, const std::string& name) {
  const Var v = push(store.at(name), true, nullptr);
  params_.emplace_back(v, name);
  return v;
}

template <class S>
void Tape<S>::backward(Var loss) {
  Node& top = nodes_[static_cast<size_t>(loss)];
  if (top.value.numel() != 1)
    throw std::invalid_argument("Tape::backward: loss must be scalar");
  if (top.grad.data.empty()) top.grad = Tensor<S>(top.value.shape);
  for (auto& g : top.grad.data) g = S(1);
  for (Var i = loss; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.back && !n.grad.data.empty()) n.back();
  }
}

template <class S>
std::map<std::string, Tensor<S>> Tape<S>::param_grads() const {
  std::map<std::string, Tensor<S>> out;
  for (const auto& [var, name] : params_) {
    const Node& n = nodes_[static_cast<size_t>(var)];
    Tensor<S> g = n.grad.data.empty() ? Tensor<S>(n.value.shape) : n.grad;
    auto it = out.find(name);
    if (it == out.end()) {
      out.emplace(name, std::move(g));
    } else {
      for (size_t i = 0; i < g.data.size(); ++i) it->second.data[i] += g.data[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <class S>
Var Tape<S>::add(Var a, Var b) {
  if (!val(a).same_shape(val(b))) throw std::invalid_argument("add: shape mismatch");
  Tensor<S> y = val(a);
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += val(b).data[i];
  const bool req = nodes_[a].requires_grad || nodes_[b].requires_grad;
  const Var out = push(std::move(y), req, nullptr);
  nodes_[out].back = [this, a, b, out] {
    accumulate(a, grad(out));
    accumulate(b, grad(out));
  };
  return out;
}

template <class S>
Var Tape<S>::sub(Var a, Var b) {
  if (!val(a).same_shape(val(b))) throw std::invalid_argument("sub: shape mismatch");
  Tensor<S> y = val(a);
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] -= val(b).data[i];
  const bool req = nodes_[a].requires_grad || nodes_[b].requires_grad;
  const Var out = push(std::move(y), req, nullptr);
  nodes_[out].back = [this, a, b, out] {
    accumulate(a, grad(out));
    if (nodes_[b].requires_grad) {
      Tensor<S> neg = grad(out);
      for (auto& v : neg.data) v = -v;
      accumulate(b, neg);
    }
  };
  return out;
}

template <class S>
Var Tape<S>::mul(Var a, Var b) {
  if (!val(a).same_shape(val(b))) throw std::invalid_argument("mul: shape mismatch");
  Tensor<S> y = val(a);
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] *= val(b).data[i];
  const bool req = nodes_[a].requires_grad || nodes_[b].requires_grad;
  const Var out = push(std::move(y), req, nullptr);
  nodes_[out].back = [this, a, b, out] {
    const Tensor<S>& g = grad(out);
    if (nodes_[a].requires_grad) {
      Tensor<S> ga = g;
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] *= val(b).data[i];
      accumulate(a, ga);
    }
    if (nodes_[b].requires_grad) {
      Tensor<S> gb = g;
      for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] *= val(a).data[i];
      accumulate(b, gb);
    }
  };
  return out;
}

template <class S>
Var Tape<S>::div(Var a, Var b) {
  if (!val(a).same_shape(val(b))) throw std::invalid_argument("div: shape mismatch");
  Tensor<S> y = val(a);
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] /= val(b).data[i];
  const bool req = nodes_[a].requires_grad || nodes_[b].requires_grad;
  const Var out = push(std::move(y), req, nullptr);
  nodes_[out].back = [this, a, b, out] {
    const Tensor<S>& g = grad(out);
    if (nodes_[a].requires_grad) {
      Tensor<S> ga = g;
      for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] /= val(b).data[i];
      accumulate(a, ga);
    }
    if (nodes_[b].requires_grad) {
      Tensor<S> gb = g;
      for (size_t i = 0; i < gb.data.size(); ++i) {
        const S bv = val(b).data[i];
        gb.data[i] *= -val(a).data[i] / (bv * bv);
      }
      accumulate(b, gb);
    }
  };
  return out;
}

template <class S>
Var Tape<S>::affine(Var x, S scale, S shift) {
  Tensor<S> y = val(x);
  for (auto& v : y.data) v = scale * v + shift;
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out, scale] {
    if (!nodes_[x].requires_grad) return;
    Tensor<S> g = grad(out);
    for (auto& v : g.data) v *= scale;
    accumulate(x, g);
  };
  return out;
}

template <class S>
Var Tape<S>::tanh_op(Var x) {
  Tensor<S> y = val(x);
  for (auto& v : y.data) v = static_cast<S>(std::tanh(double(v)));
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out] {
    if (!nodes_[x].requires_grad) return;
    Tensor<S> g = grad(out);
    for (size_t i = 0; i < g.data.size(); ++i) {
      const S t = val(out).data[i];
      g.data[i] *= (S(1) - t * t);
    }
    accumulate(x, g);
  };
  return out;
}

template <class S>
Var Tape<S>::leaky_relu(Var x, S slope) {
  Tensor<S> y = val(x);
  for (auto& v : y.data) v = v > S(0) ? v : slope * v;
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out, slope] {
    if (!nodes_[x].requires_grad) return;
    Tensor<S> g = grad(out);
    for (size_t i = 0; i < g.data.size(); ++i)
      if (val(x).data[i] <= S(0)) g.data[i] *= slope;
    accumulate(x, g);
  };
  return out;
}

template <class S>
Var Tape<S>::relu(Var x) {
  return leaky_relu(x, S(0));
}

template <class S>
Var Tape<S>::abs_op(Var x) {
  Tensor<S> y = val(x);
  for (auto& v : y.data) v = v < S(0) ? -v : v;
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out] {
    if (!nodes_[x].requires_grad) return;
    Tensor<S> g = grad(out);
    for (size_t i = 0; i < g.data.size(); ++i) {
      const S v = val(x).data[i];
      g.data[i] *= v > S(0) ? S(1) : (v < S(0) ? S(-1) : S(0));
    }
    accumulate(x, g);
  };
  return out;
}

template <class S>
Var Tape<S>::log_clamped(Var x, S floor) {
  Tensor<S> y = val(x);
  for (auto& v : y.data) v = static_cast<S>(std::log(double(std::max(v, floor))));
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out, floor] {
    if (!nodes_[x].requires_grad) return;
    Tensor<S> g = grad(out);
    for (size_t i = 0; i < g.data.size(); ++i) {
      const S v = val(x).data[i];
      g.data[i] = v >= floor ? g.data[i] / v : S(0);
    }
    accumulate(x, g);
  };
  return out;
}

template <class S>
Var Tape<S>::sqrt_op(Var x) {
  Tensor<S> y = val(x);
  for (auto& v : y.data) v = static_cast<S>(std::sqrt(double(v)));
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out] {
    if (!nodes_[x].requires_grad) return;
    Tensor<S> g = grad(out);
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] /= S(2) * val(out).data[i];
    accumulate(x, g);
  };
  return out;
}

template <class S>
Var Tape<S>::sum(Var x) {
  double total = 0.0;
  for (const S v : val(x).data) total += double(v);
  Tensor<S> y({1});
  y.data[0] = static_cast<S>(total);
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out] {
    if (!nodes_[x].requires_grad) return;
    const S g = grad(out).data[0];
    Tensor<S> gx(val(x).shape);
    for (auto& v : gx.data) v = g;
    accumulate(x, gx);
  };
  return out;
}

template <class S>
Var Tape<S>::mean(Var x) {
  const int64_t n = val(x).numel();
  double total = 0.0;
  for (const S v : val(x).data) total += double(v);
  Tensor<S> y({1});
  y.data[0] = static_cast<S>(total / double(n));
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out, n] {
    if (!nodes_[x].requires_grad) return;
    const S g = static_cast<S>(double(grad(out).data[0]) / double(n));
    Tensor<S> gx(val(x).shape);
    for (auto& v : gx.data) v = g;
    accumulate(x, gx);
  };
  return out;
}

// ---------------------------------------------------------------------------
// Structural ops
// ---------------------------------------------------------------------------

template <class S>
Var Tape<S>::concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_channels: empty input list");
  int64_t channels = 0;
  const int64_t T = val(xs[0]).shape.at(1);
  bool req = false;
  for (Var x : xs) {
    if (val(x).rank() != 2 || val(x).shape[1] != T)
      throw std::invalid_argument("concat_channels: time length mismatch");
    channels += val(x).shape[0];
    req = req || nodes_[x].requires_grad;
  }
  Tensor<S> y({channels, T});
  int64_t c0 = 0;
  for (Var x : xs) {
    const Tensor<S>& xv = val(x);
    std::copy(xv.data.begin(), xv.data.end(), y.row(c0));
    c0 += xv.shape[0];
  }
  const Var out = push(std::move(y), req, nullptr);
  nodes_[out].back = [this, xs, out] {
    const Tensor<S>& g = grad(out);
    int64_t c0 = 0;
    for (Var x : xs) {
      const int64_t C = val(x).shape[0];
      if (nodes_[x].requires_grad) {
        Tensor<S> gx(val(x).shape);
        std::copy(g.row(c0), g.row(c0) + C * g.shape[1], gx.data.begin());
        accumulate(x, gx);
      }
      c0 += C;
    }
  };
  return out;
}

template <class S>
Var Tape<S>::slice_time(Var x, int64_t start, int64_t len) {
  const Tensor<S>& xv = val(x);
  if (xv.rank() != 2 || start < 0 || start + len > xv.shape[1])
    throw std::invalid_argument("slice_time: range out of bounds");
  const int64_t C = xv.shape[0];
  Tensor<S> y({C, len});
  for (int64_t c = 0; c < C; ++c)
    std::copy(xv.row(c) + start, xv.row(c) + start + len, y.row(c));
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out, start, len] {
    if (!nodes_[x].requires_grad) return;
    const Tensor<S>& g = grad(out);
    Tensor<S> gx(val(x).shape);
    const int64_t C = gx.shape[0];
    for (int64_t c = 0; c < C; ++c)
      std::copy(g.row(c), g.row(c) + len, gx.row(c) + start);
    accumulate(x, gx);
  };
  return out;
}

// ---------------------------------------------------------------------------
// Network ops
// ---------------------------------------------------------------------------

template <class S>
Var Tape<S>::weight_norm(Var g, Var v) {
  Tensor<S> w = weight_norm_effective(val(g), val(v));
  const bool req = nodes_[g].requires_grad || nodes_[v].requires_grad;
  const Var out = push(std::move(w), req, nullptr);
  nodes_[out].back = [this, g, v, out] {
    const Tensor<S>& gw = grad(out);
    const Tensor<S>& vv = val(v);
    const Tensor<S>& gv_mag = val(g);
    const int64_t out_ch = vv.shape.at(0);
    const int64_t per = vv.numel() / out_ch;
    Tensor<S> gg({out_ch});
    Tensor<S> gdir(vv.shape);
    for (int64_t o = 0; o < out_ch; ++o) {
      const S* vo = vv.data.data() + o * per;
      const S* gwo = gw.data.data() + o * per;
      double nsq = 0.0, dot = 0.0;
      for (int64_t i = 0; i < per; ++i) {
        nsq += double(vo[i]) * double(vo[i]);
        dot += double(gwo[i]) * double(vo[i]);
      }
      const double norm = std::sqrt(nsq);
      gg.data[static_cast<size_t>(o)] = static_cast<S>(dot / norm);
      const double scale = double(gv_mag.data[static_cast<size_t>(o)]) / norm;
      const double corr = scale * dot / nsq;
      S* gvo = gdir.data.data() + o * per;
      for (int64_t i = 0; i < per; ++i)
        gvo[i] = static_cast<S>(scale * double(gwo[i]) - corr * double(vo[i]));
    }
    accumulate(g, gg);
    accumulate(v, gdir);
  };
  return out;
}

template <class S>
Var Tape<S>::conv1d(Var x, Var w, Var b, int64_t stride, int64_t dilation,
                    int64_t groups) {
  std::vector<S> bias(val(b).data.begin(), val(b).data.end());
  Tensor<S> y = conv1d_batch(val(x), val(w), bias, stride, dilation, groups);
  const bool req =
      nodes_[x].requires_grad || nodes_[w].requires_grad || nodes_[b].requires_grad;
  const Var out = push(std::move(y), req, nullptr);
  nodes_[out].back = [this, x, w, b, out, stride, dilation, groups] {
    const Tensor<S>& gy = grad(out);
    const Tensor<S>& xv = val(x);
    const Tensor<S>& wv = val(w);
    const int64_t in_ch = xv.shape[0];
    const int64_t len = xv.shape[1];
    const int64_t out_ch = wv.shape[0];
    const int64_t kernel = wv.shape[2];
    const int64_t hist = (kernel - 1) * dilation;
    const int64_t out_len = gy.shape[1];
    const int64_t in_per = in_ch / groups;
    const int64_t out_per = out_ch / groups;

    Tensor<S> xbuf({in_ch, hist + len});
    for (int64_t c = 0; c < in_ch; ++c)
      std::copy(xv.row(c), xv.row(c) + len, xbuf.row(c) + hist);

    const bool need_x = nodes_[x].requires_grad;
    const bool need_w = nodes_[w].requires_grad;
    const bool need_b = nodes_[b].requires_grad;
    Tensor<S> gxbuf = need_x ? Tensor<S>({in_ch, hist + len}) : Tensor<S>();
    Tensor<S> gw = need_w ? Tensor<S>(wv.shape) : Tensor<S>();
    Tensor<S> gb = need_b ? Tensor<S>({out_ch}) : Tensor<S>();

    for (int64_t o = 0; o < out_ch; ++o) {
      const int64_t grp = o / out_per;
      const S* gyo = gy.row(o);
      for (int64_t m = 0; m < out_len; ++m) {
        const S gval = gyo[m];
        if (need_b) gb.data[static_cast<size_t>(o)] += gval;
        const int64_t base = hist + m * stride;
        for (int64_t ci = 0; ci < in_per; ++ci) {
          const int64_t cg = grp * in_per + ci;
          const S* xc = xbuf.row(cg);
          const S* wk = wv.data.data() + (o * in_per + ci) * kernel;
          if (need_w) {
            S* gwk = gw.data.data() + (o * in_per + ci) * kernel;
            for (int64_t j = 0; j < kernel; ++j) gwk[j] += gval * xc[base - j * dilation];
          }
          if (need_x) {
            S* gxc = gxbuf.row(cg);
            for (int64_t j = 0; j < kernel; ++j) gxc[base - j * dilation] += gval * wk[j];
          }
        }
      }
    }
    if (need_x) {
      Tensor<S> gx({in_ch, len});
      for (int64_t c = 0; c < in_ch; ++c)
        std::copy(gxbuf.row(c) + hist, gxbuf.row(c) + hist + len, gx.row(c));
      accumulate(x, gx);
    }
    if (need_w) accumulate(w, gw);
    if (need_b) accumulate(b, gb);
  };
  return out;
}

template <class S>
Var Tape<S>::channel_norm(Var x) {
  Tensor<S> y;
  std::vector<S> inv_std;
  channel_norm_core(val(x), y, &inv_std);
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out, inv_std = std::move(inv_std)] {
    if (!nodes_[x].requires_grad) return;
    const Tensor<S>& gy = grad(out);
    const Tensor<S>& yv = val(out);
    const int64_t C = yv.shape[0];
    const int64_t T = yv.shape[1];
    Tensor<S> gx(yv.shape);
    for (int64_t t = 0; t < T; ++t) {
      double mg = 0.0, mgy = 0.0;
      for (int64_t c = 0; c < C; ++c) {
        mg += double(gy.at(c, t));
        mgy += double(gy.at(c, t)) * double(yv.at(c, t));
      }
      mg /= double(C);
      mgy /= double(C);
      const double inv = double(inv_std[static_cast<size_t>(t)]);
      for (int64_t c = 0; c < C; ++c)
        gx.at(c, t) = static_cast<S>(
            inv * (double(gy.at(c, t)) - mg - double(yv.at(c, t)) * mgy));
    }
    accumulate(x, gx);
  };
  return out;
}

template <class S>
Var Tape<S>::gated(Var a, Var b) {
  Tensor<S> ta, sb, y;
  gated_core(val(a), val(b), ta, sb, y);
  const bool req = nodes_[a].requires_grad || nodes_[b].requires_grad;
  const Var out = push(std::move(y), req, nullptr);
  nodes_[out].back = [this, a, b, out, ta = std::move(ta), sb = std::move(sb)] {
    const Tensor<S>& gy = grad(out);
    const int64_t C = ta.shape[0];
    const int64_t T = ta.shape[1];
    if (nodes_[a].requires_grad) {
      Tensor<S> ga(ta.shape);
      for (size_t i = 0; i < ga.data.size(); ++i) {
        const S t = ta.data[i];
        ga.data[i] = gy.data[i] * sb.data[i] * (S(1) - t * t);
      }
      accumulate(a, ga);
    }
    if (nodes_[b].requires_grad) {
      Tensor<S> gb(ta.shape);
      for (int64_t t = 0; t < T; ++t) {
        double inner = 0.0;
        for (int64_t c = 0; c < C; ++c)
          inner += double(sb.at(c, t)) * double(ta.at(c, t)) * double(gy.at(c, t));
        for (int64_t c = 0; c < C; ++c)
          gb.at(c, t) = static_cast<S>(
              double(sb.at(c, t)) *
              (double(ta.at(c, t)) * double(gy.at(c, t)) - inner));
      }
      accumulate(b, gb);
    }
  };
  return out;
}

template <class S>
Var Tape<S>::resample(Var x, const Ratio& ratio) {
  Tensor<S> y = dsp::fractional_resample(val(x), ratio);
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out, ratio] {
    if (!nodes_[x].requires_grad) return;
    const Tensor<S>& gy = grad(out);
    Tensor<S> gx(val(x).shape);
    const int64_t C = gx.shape[0];
    const int64_t out_len = gy.shape[1];
    const bool up = ratio.num > ratio.den;
    for (int64_t c = 0; c < C; ++c) {
      const S* gyr = gy.row(c);
      S* gxr = gx.row(c);
      for (int64_t m = 0; m < out_len; ++m) {
        const dsp::ResamplePoint p = dsp::resample_source(m, ratio);
        if (p.rem == 0) {
          gxr[p.i0] += gyr[m];
        } else if (up) {
          const S f = dsp::resample_frac<S>(p.rem, ratio);
          gxr[p.i0] += (S(1) + f) * gyr[m];
          if (p.i0 >= 1) gxr[p.i0 - 1] -= f * gyr[m];
        } else {
          const S f = dsp::resample_frac<S>(p.rem, ratio);
          gxr[p.i0] += (S(1) - f) * gyr[m];
          gxr[p.i0 + 1] += f * gyr[m];
        }
      }
    }
    accumulate(x, gx);
  };
  return out;
}

template <class S>
Var Tape<S>::pqmf_analyze(Var x, const dsp::PqmfBank& bank) {
  const Tensor<S>& xv = val(x);
  if (xv.rank() != 2 || xv.shape[0] != 1)
    throw std::invalid_argument("pqmf_analyze: expected shape (1, time)");
  if (xv.shape[1] % bank.num_bands != 0)
    throw std::invalid_argument("pqmf_analyze: length not divisible by band count");
  Tensor<S> y = dsp::pqmf_analysis_tensor(xv, bank);
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out, bank] {
    if (!nodes_[x].requires_grad) return;
    const Tensor<S>& gy = grad(out);
    Tensor<S> gx(val(x).shape);
    const int B = bank.num_bands;
    const int T = bank.taps;
    const int64_t sub_len = gy.shape[1];
    const int64_t len = gx.shape[1];
    for (int b = 0; b < B; ++b) {
      const S* gr = gy.row(b);
      for (int64_t m = 0; m < sub_len; ++m) {
        const S g = gr[m];
        for (int j = 0; j < T; ++j) {
          const int64_t t = int64_t{B} * m - j;
          if (t >= 0 && t < len)
            gx.data[static_cast<size_t>(t)] += static_cast<S>(bank.analysis[b][j]) * g;
        }
      }
    }
    accumulate(x, gx);
  };
  return out;
}

template <class S>
Var Tape<S>::pqmf_synthesize(Var x, const dsp::PqmfBank& bank) {
  Tensor<S> y = dsp::pqmf_synthesis_tensor(val(x), bank);
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out, bank] {
    if (!nodes_[x].requires_grad) return;
    const Tensor<S>& gy = grad(out);
    Tensor<S> gx(val(x).shape);
    const int B = bank.num_bands;
    const int T = bank.taps;
    const int64_t sub_len = gx.shape[1];
    const int64_t out_len = gy.shape[1];
    for (int b = 0; b < B; ++b) {
      S* gr = gx.row(b);
      for (int64_t m = 0; m < sub_len; ++m) {
        double acc = 0.0;
        for (int j = 0; j < T; ++j) {
          const int64_t t = int64_t{B} * m + j;
          if (t < out_len) acc += bank.synthesis[b][j] * double(gy.data[static_cast<size_t>(t)]);
        }
        gr[m] += static_cast<S>(acc);
      }
    }
    accumulate(x, gx);
  };
  return out;
}

template <class S>
Var Tape<S>::avg_pool(Var x, int64_t factor) {
  const Tensor<S>& xv = val(x);
  if (factor < 1) throw std::invalid_argument("avg_pool: factor must be >= 1");
  const int64_t C = xv.shape.at(0);
  const int64_t out_len = xv.shape.at(1) / factor;
  Tensor<S> y({C, out_len});
  for (int64_t c = 0; c < C; ++c) {
    const S* xr = xv.row(c);
    S* yr = y.row(c);
    for (int64_t m = 0; m < out_len; ++m) {
      double acc = 0.0;
      for (int64_t i = 0; i < factor; ++i) acc += double(xr[m * factor + i]);
      yr[m] = static_cast<S>(acc / double(factor));
    }
  }
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out, factor] {
    if (!nodes_[x].requires_grad) return;
    const Tensor<S>& gy = grad(out);
    Tensor<S> gx(val(x).shape);
    const int64_t C = gx.shape[0];
    for (int64_t c = 0; c < C; ++c) {
      const S* gyr = gy.row(c);
      S* gxr = gx.row(c);
      for (int64_t m = 0; m < gy.shape[1]; ++m) {
        const S g = static_cast<S>(double(gyr[m]) / double(factor));
        for (int64_t i = 0; i < factor; ++i) gxr[m * factor + i] += g;
      }
    }
    accumulate(x, gx);
  };
  return out;
}

template <class S>
Var Tape<S>::stft_mag(Var x, int fft_size, int hop, int window_length) {
  const Tensor<S>& xv = val(x);
  if (xv.rank() != 2 || xv.shape[0] != 1)
    throw std::invalid_argument("stft_mag: expected shape (1, time)");
  std::vector<S> sig(xv.data.begin(), xv.data.end());
  dsp::ComplexSpectrogram<S> spec = dsp::stft(sig, fft_size, hop, window_length);
  const int64_t frames = spec.num_frames();
  const int bins = spec.bins();
  Tensor<S> y({bins, frames});
  for (int64_t f = 0; f < frames; ++f)
    for (int k = 0; k < bins; ++k)
      y.at(k, f) = static_cast<S>(std::abs(std::complex<double>(
          spec.frames[static_cast<size_t>(f)][static_cast<size_t>(k)])));
  const Var out = push(std::move(y), nodes_[x].requires_grad, nullptr);
  nodes_[out].back = [this, x, out, spec = std::move(spec), fft_size, hop,
                      window_length] {
    if (!nodes_[x].requires_grad) return;
    const Tensor<S>& gy = grad(out);
    Tensor<S> gx(val(x).shape);
    const std::vector<double> w = dsp::hann_window(window_length);
    const int bins = fft_size / 2 + 1;
    std::vector<std::complex<double>> buf(static_cast<size_t>(fft_size));
    for (int64_t f = 0; f < spec.num_frames(); ++f) {
      std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
      for (int k = 0; k < bins; ++k) {
        const std::complex<double> X(spec.frames[static_cast<size_t>(f)][static_cast<size_t>(k)]);
        const double a = std::abs(X);
        if (a > 1e-300) buf[static_cast<size_t>(k)] = double(gy.at(k, f)) * X / a;
      }
      fft_inplace(buf, true);
      S* gxr = gx.row(0);
      for (int n = 0; n < window_length; ++n)
        gxr[f * hop + n] += static_cast<S>(
            w[n] * double(fft_size) * buf[static_cast<size_t>(n)].real());
    }
    accumulate(x, gx);
  };
  return out;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace postgan::nn
