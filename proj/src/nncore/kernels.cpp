#include <cmath>
#include <stdexcept>

#include "postgan/nncore.hpp"

namespace postgan::nn {

template <class S>
Tensor<S>& WeightStore<S>::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::out_of_range("WeightStore: missing tensor " + name);
  return it->second;
}

template <class S>
const Tensor<S>& WeightStore<S>::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::out_of_range("WeightStore: missing tensor " + name);
  return it->second;
}

template <class S>
void WeightStore<S>::add(const std::string& name, Tensor<S> t) {
  if (has(name)) throw std::invalid_argument("WeightStore: duplicate tensor " + name);
  tensors.emplace(name, std::move(t));
}

template <class S>
Tensor<S> weight_norm_effective(const Tensor<S>& g, const Tensor<S>& v) {
  const int64_t out_ch = v.shape.at(0);
  if (g.numel() != out_ch)
    throw std::invalid_argument("weight_norm: g size must equal output channels");
  const int64_t per = v.numel() / out_ch;
  Tensor<S> w;
  w.shape = v.shape;
  w.data.resize(v.data.size());
  for (int64_t o = 0; o < out_ch; ++o) {
    double nsq = 0.0;
    const S* vo = v.data.data() + o * per;
    for (int64_t i = 0; i < per; ++i) nsq += double(vo[i]) * double(vo[i]);
    const S scale = static_cast<S>(double(g.data[static_cast<size_t>(o)]) / std::sqrt(nsq));
    S* wo = w.data.data() + o * per;
    for (int64_t i = 0; i < per; ++i) wo[i] = scale * vo[i];
  }
  return w;
}

template <class S>
void conv1d_core(const S* xbuf, int64_t xbuf_len, int64_t in_ch, const S* w,
                 int64_t out_ch, int64_t kernel, const S* bias, int64_t stride,
                 int64_t dilation, int64_t groups, S* y, int64_t out_len) {
  const int64_t hist = (kernel - 1) * dilation;
  const int64_t in_per = in_ch / groups;
  const int64_t out_per = out_ch / groups;
  for (int64_t o = 0; o < out_ch; ++o) {
    const int64_t g = o / out_per;
    const S* wo = w + o * in_per * kernel;
    S* yo = y + o * out_len;
    for (int64_t m = 0; m < out_len; ++m) {
      const int64_t base = hist + m * stride;
      S acc = bias ? bias[o] : S(0);
      for (int64_t ci = 0; ci < in_per; ++ci) {
        const S* xc = xbuf + (g * in_per + ci) * xbuf_len;
        const S* wk = wo + ci * kernel;
        for (int64_t j = 0; j < kernel; ++j) acc += wk[j] * xc[base - j * dilation];
      }
      yo[m] = acc;
    }
  }
}

template <class S>
Tensor<S> conv1d_batch(const Tensor<S>& x, const Tensor<S>& w, const std::vector<S>& bias,
                       int64_t stride, int64_t dilation, int64_t groups) {
  if (x.rank() != 2) throw std::invalid_argument("conv1d: input must be (channels, time)");
  if (w.rank() != 3) throw std::invalid_argument("conv1d: weight must be (out, in/g, k)");
  const int64_t in_ch = x.shape[0];
  const int64_t out_ch = w.shape[0];
  const int64_t kernel = w.shape[2];
  if (w.shape[1] * groups != in_ch)
    throw std::invalid_argument("conv1d: channel mismatch between input and weight");
  if (out_ch % groups != 0 || in_ch % groups != 0)
    throw std::invalid_argument("conv1d: channels must divide groups");
  if (!bias.empty() && static_cast<int64_t>(bias.size()) != out_ch)
    throw std::invalid_argument("conv1d: bias size mismatch");
  const int64_t len = x.shape[1];
  const int64_t hist = (kernel - 1) * dilation;
  const int64_t out_len = (len + stride - 1) / stride;

  // left-pad every channel with zero history so the kernel sees a causal edge
  Tensor<S> xbuf({in_ch, hist + len});
  for (int64_t c = 0; c < in_ch; ++c)
    std::copy(x.row(c), x.row(c) + len, xbuf.row(c) + hist);

  Tensor<S> y({out_ch, out_len});
  conv1d_core(xbuf.data.data(), hist + len, in_ch, w.data.data(), out_ch, kernel,
              bias.empty() ? nullptr : bias.data(), stride, dilation, groups,
              y.data.data(), out_len);
  return y;
}

template <class S>
void channel_norm_core(const Tensor<S>& x, Tensor<S>& y, std::vector<S>* inv_std) {
  const int64_t C = x.shape.at(0);
  const int64_t T = x.shape.at(1);
  y = Tensor<S>(x.shape);
  if (inv_std) inv_std->assign(static_cast<size_t>(T), S(0));
  constexpr double kEps = 1e-5;
  for (int64_t t = 0; t < T; ++t) {
    double mean = 0.0;
    for (int64_t c = 0; c < C; ++c) mean += double(x.at(c, t));
    mean /= double(C);
    double var = 0.0;
    for (int64_t c = 0; c < C; ++c) {
      const double d = double(x.at(c, t)) - mean;
      var += d * d;
    }
    var /= double(C);
    const double inv = 1.0 / std::sqrt(var + kEps);
    if (inv_std) (*inv_std)[static_cast<size_t>(t)] = static_cast<S>(inv);
    for (int64_t c = 0; c < C; ++c)
      y.at(c, t) = static_cast<S>((double(x.at(c, t)) - mean) * inv);
  }
}

template <class S>
void gated_core(const Tensor<S>& a, const Tensor<S>& b, Tensor<S>& tanh_a,
                Tensor<S>& softmax_b, Tensor<S>& y) {
  if (!a.same_shape(b)) throw std::invalid_argument("gated: shape mismatch");
  const int64_t C = a.shape.at(0);
  const int64_t T = a.shape.at(1);
  tanh_a = Tensor<S>(a.shape);
  softmax_b = Tensor<S>(a.shape);
  y = Tensor<S>(a.shape);
  for (size_t i = 0; i < a.data.size(); ++i)
    tanh_a.data[i] = static_cast<S>(std::tanh(double(a.data[i])));
  for (int64_t t = 0; t < T; ++t) {
    double mx = -1e300;
    for (int64_t c = 0; c < C; ++c) mx = std::max(mx, double(b.at(c, t)));
    double total = 0.0;
    for (int64_t c = 0; c < C; ++c) {
      const double e = std::exp(double(b.at(c, t)) - mx);
      softmax_b.at(c, t) = static_cast<S>(e);
      total += e;
    }
    for (int64_t c = 0; c < C; ++c) {
      softmax_b.at(c, t) = static_cast<S>(double(softmax_b.at(c, t)) / total);
      y.at(c, t) = tanh_a.at(c, t) * softmax_b.at(c, t);
    }
  }
}

template <class S>
void Conv1d<S>::init(WeightStore<S>& store, Rng& rng) const {
  Tensor<S> v({out_ch, in_ch / groups, kernel});
  for (auto& x : v.data) x = static_cast<S>(0.02 * rng.gaussian());
  Tensor<S> g({out_ch});
  const int64_t per = v.numel() / out_ch;
  for (int64_t o = 0; o < out_ch; ++o) {
    double nsq = 0.0;
    for (int64_t i = 0; i < per; ++i) {
      const double x = double(v.data[static_cast<size_t>(o * per + i)]);
      nsq += x * x;
    }
    g.data[static_cast<size_t>(o)] = static_cast<S>(std::sqrt(nsq));
  }
  store.add(name + ".v", std::move(v));
  store.add(name + ".g", std::move(g));
  store.add(name + ".b", Tensor<S>({out_ch}));
}

template <class S>
Var Conv1d<S>::forward(Tape<S>& tape, const WeightStore<S>& store, Var x) const {
  const Var g = tape.param(store, name + ".g");
  const Var v = tape.param(store, name + ".v");
  const Var w = tape.weight_norm(g, v);
  const Var b = tape.param(store, name + ".b");
  return tape.conv1d(x, w, b, stride, dilation, groups);
}

template <class S>
Tensor<S> Conv1d<S>::effective_weight(const WeightStore<S>& store) const {
  return weight_norm_effective(store.at(name + ".g"), store.at(name + ".v"));
}

template <class S>
const Tensor<S>& Conv1d<S>::bias(const WeightStore<S>& store) const {
  return store.at(name + ".b");
}

template <class S>
void ConvStream<S>::bind(const Conv1d<S>& layer, const WeightStore<S>& store) {
  if (layer.stride != 1)
    throw std::invalid_argument("ConvStream: only stride 1 supported");
  weight = layer.effective_weight(store);
  const Tensor<S>& b = layer.bias(store);
  bias.assign(b.data.begin(), b.data.end());
  in_ch = layer.in_ch;
  out_ch = layer.out_ch;
  kernel = layer.kernel;
  dilation = layer.dilation;
  groups = layer.groups;
  reset();
}

template <class S>
void ConvStream<S>::reset() {
  hist = Tensor<S>({in_ch, (kernel - 1) * dilation});
}

template <class S>
Tensor<S> ConvStream<S>::step(const Tensor<S>& chunk) {
  if (chunk.rank() != 2 || chunk.shape[0] != in_ch)
    throw std::invalid_argument("ConvStream: channel mismatch");
  const int64_t n = chunk.shape[1];
  const int64_t H = hist.shape[1];
  Tensor<S> xbuf({in_ch, H + n});
  for (int64_t c = 0; c < in_ch; ++c) {
    std::copy(hist.row(c), hist.row(c) + H, xbuf.row(c));
    std::copy(chunk.row(c), chunk.row(c) + n, xbuf.row(c) + H);
  }
  Tensor<S> y({out_ch, n});
  conv1d_core(xbuf.data.data(), H + n, in_ch, weight.data.data(), out_ch, kernel,
              bias.empty() ? nullptr : bias.data(), int64_t{1}, dilation, groups,
              y.data.data(), n);
  for (int64_t c = 0; c < in_ch; ++c) {
    const S* row = xbuf.row(c);
    for (int64_t i = 0; i < H; ++i) hist.at(c, i) = row[n + i];
  }
  return y;
}

template <class S>
void Adam<S>::step(WeightStore<S>& store, const std::map<std::string, Tensor<S>>& grads,
                   double lr) {
  // lr == 0 is a legal frozen step: moments advance, parameters do not.
  if (lr < 0.0) throw std::invalid_argument("Adam: learning rate must not be negative");
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, double(step_count));
  const double bc2 = 1.0 - std::pow(beta2, double(step_count));
  for (const auto& [name, g] : grads) {
    Tensor<S>& p = store.at(name);
    if (!p.same_shape(g)) throw std::invalid_argument("Adam: grad shape mismatch for " + name);
    auto mit = m.find(name);
    if (mit == m.end()) {
      mit = m.emplace(name, Tensor<S>(p.shape)).first;
      v.emplace(name, Tensor<S>(p.shape));
    }
    Tensor<S>& mo = mit->second;
    Tensor<S>& vo = v.at(name);
    for (size_t i = 0; i < p.data.size(); ++i) {
      const double gi = double(g.data[i]);
      const double mi = beta1 * double(mo.data[i]) + (1.0 - beta1) * gi;
      const double vi = beta2 * double(vo.data[i]) + (1.0 - beta2) * gi * gi;
      mo.data[i] = static_cast<S>(mi);
      vo.data[i] = static_cast<S>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p.data[i] = static_cast<S>(double(p.data[i]) - lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

#define POSTGAN_INSTANTIATE_NN_KERNELS(S)                                                  \
  template struct WeightStore<S>;                                                          \
  template Tensor<S> weight_norm_effective<S>(const Tensor<S>&, const Tensor<S>&);         \
  template void conv1d_core<S>(const S*, int64_t, int64_t, const S*, int64_t, int64_t,     \
                               const S*, int64_t, int64_t, int64_t, S*, int64_t);          \
  template Tensor<S> conv1d_batch<S>(const Tensor<S>&, const Tensor<S>&,                   \
                                     const std::vector<S>&, int64_t, int64_t, int64_t);    \
  template void channel_norm_core<S>(const Tensor<S>&, Tensor<S>&, std::vector<S>*);       \
  template void gated_core<S>(const Tensor<S>&, const Tensor<S>&, Tensor<S>&, Tensor<S>&,  \
                              Tensor<S>&);                                                 \
  template struct Conv1d<S>;                                                               \
  template struct ConvStream<S>;                                                           \
  template struct Adam<S>;

POSTGAN_INSTANTIATE_NN_KERNELS(float)
POSTGAN_INSTANTIATE_NN_KERNELS(double)

}  // namespace postgan::nn
