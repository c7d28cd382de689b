#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "postgan/common.hpp"
#include "postgan/dsp.hpp"
#include "postgan/tensor.hpp"

namespace postgan::nn {

// ---------------------------------------------------------------------------
// Parameter storage
// ---------------------------------------------------------------------------

// Named parameter tensors. Conv weights live as a weight-norm pair
// ("name.g" per-output-channel magnitudes, "name.v" directions) plus "name.b".
template <class S>
struct WeightStore {
  std::map<std::string, Tensor<S>> tensors;

  bool has(const std::string& name) const { return tensors.count(name) != 0; }
  Tensor<S>& at(const std::string& name);
  const Tensor<S>& at(const std::string& name) const;
  void add(const std::string& name, Tensor<S> t);

  template <class T>
  WeightStore<T> cast() const {
    WeightStore<T> out;
    for (const auto& [k, t] : tensors) out.tensors.emplace(k, t.template cast<T>());
    return out;
  }
};

// Effective weight w[o] = g[o] * v[o] / ||v[o]|| (norm over all trailing axes).
// Single implementation shared by the tape op and the streaming path so both
// see bit-identical weights.
template <class S>
Tensor<S> weight_norm_effective(const Tensor<S>& g, const Tensor<S>& v);

// ---------------------------------------------------------------------------
// Shared kernels (used by tape forward, inference, and streaming)
// ---------------------------------------------------------------------------

// xbuf rows are [history | chunk] with history length (k-1)*dilation; batch
// mode passes a zero history. Output m reads input positions m*stride - j*dil.
template <class S>
void conv1d_core(const S* xbuf, int64_t xbuf_len, int64_t in_ch, const S* w,
                 int64_t out_ch, int64_t kernel, const S* bias, int64_t stride,
                 int64_t dilation, int64_t groups, S* y, int64_t out_len);

template <class S>
Tensor<S> conv1d_batch(const Tensor<S>& x, const Tensor<S>& w, const std::vector<S>& bias,
                       int64_t stride, int64_t dilation, int64_t groups);

template <class S>
void channel_norm_core(const Tensor<S>& x, Tensor<S>& y, std::vector<S>* inv_std);

template <class S>
void gated_core(const Tensor<S>& a, const Tensor<S>& b, Tensor<S>& tanh_a,
                Tensor<S>& softmax_b, Tensor<S>& y);

// ---------------------------------------------------------------------------
// Reverse-mode tape
// ---------------------------------------------------------------------------

using Var = int;

template <class S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor<S> value, bool requires_grad = false);
  // Leaf bound to a named parameter; grads are collected per name.
  Var param(const WeightStore<S>& store, const std::string& name);

  Var weight_norm(Var g, Var v);
  Var conv1d(Var x, Var w, Var b, int64_t stride = 1, int64_t dilation = 1,
             int64_t groups = 1);
  Var channel_norm(Var x);
  Var gated(Var a, Var b);  // tanh(a) (*) softmax over channels of b
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var affine(Var x, S scale, S shift);
  Var tanh_op(Var x);
  Var leaky_relu(Var x, S slope);
  Var relu(Var x);
  Var abs_op(Var x);
  Var log_clamped(Var x, S floor);  // log(max(x, floor))
  Var sqrt_op(Var x);
  Var sum(Var x);   // scalar {1}
  Var mean(Var x);  // scalar {1}
  Var concat_channels(const std::vector<Var>& xs);
  Var slice_time(Var x, int64_t start, int64_t len);
  Var resample(Var x, const Ratio& ratio);
  Var pqmf_analyze(Var x, const dsp::PqmfBank& bank);
  Var pqmf_synthesize(Var x, const dsp::PqmfBank& bank);
  Var avg_pool(Var x, int64_t factor);
  Var stft_mag(Var x, int fft_size, int hop, int window_length);

  const Tensor<S>& val(Var v) const { return nodes_[static_cast<size_t>(v)].value; }
  const Tensor<S>& grad(Var v) const;
  bool has_grad(Var v) const { return !nodes_[static_cast<size_t>(v)].grad.data.empty(); }

  // Reverse sweep from a scalar node; fills gradients of all contributing nodes.
  void backward(Var loss);
  // Per-parameter-name gradient sums (after backward).
  std::map<std::string, Tensor<S>> param_grads() const;

  size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    bool requires_grad = false;
    std::function<void()> back;  // nullptr for leaves
  };

  Var push(Tensor<S> value, bool requires_grad, std::function<void()> back);
  Tensor<S>& grad_slot(Var v) { return nodes_[static_cast<size_t>(v)].grad; }
  void accumulate(Var v, const Tensor<S>& g);

  std::vector<Node> nodes_;
  std::vector<std::pair<Var, std::string>> params_;
};

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

// Causal conv1d layer descriptor; owns no storage, just names and shapes.
template <class S>
struct Conv1d {
  std::string name;
  int64_t in_ch = 0, out_ch = 0, kernel = 1;
  int64_t stride = 1, dilation = 1, groups = 1;

  // v ~ N(0, 0.02), g = ||v|| per output channel, bias 0.
  void init(WeightStore<S>& store, Rng& rng) const;
  Var forward(Tape<S>& tape, const WeightStore<S>& store, Var x) const;
  Tensor<S> effective_weight(const WeightStore<S>& store) const;
  const Tensor<S>& bias(const WeightStore<S>& store) const;
  int64_t history() const { return (kernel - 1) * dilation; }
};

// Streaming context for one causal conv: ring of the last (k-1)*dilation
// inputs plus frozen effective weights. Chunked output is bit-identical to
// batch conv1d on the concatenated input (stride 1 only).
template <class S>
struct ConvStream {
  Tensor<S> weight;      // effective (out, in/groups, k)
  std::vector<S> bias;
  int64_t in_ch = 0, out_ch = 0, kernel = 1, dilation = 1, groups = 1;
  Tensor<S> hist;        // (in_ch, (k-1)*dilation)

  void bind(const Conv1d<S>& layer, const WeightStore<S>& store);
  void reset();
  Tensor<S> step(const Tensor<S>& chunk);
};

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

template <class S>
struct Adam {
  double beta1 = 0.5, beta2 = 0.9, eps = 1e-8;
  int64_t step_count = 0;
  std::map<std::string, Tensor<S>> m, v;

  // Bias-corrected update on every parameter present in `grads`.
  void step(WeightStore<S>& store, const std::map<std::string, Tensor<S>>& grads,
            double lr);
};

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------

// Magic "PGAN", version u32, metadata (u64 length + canonical config text),
// then u64 tensor count and per-tensor records: u32 name length, name bytes,
// u32 rank, u32 dims, little-endian float32 payload.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const WeightStore<float>& store,
                     const std::string& metadata);
WeightStore<float> load_checkpoint(const std::string& path, std::string* metadata);

}  // namespace postgan::nn
