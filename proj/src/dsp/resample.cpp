#include "postgan/dsp.hpp"

#include <stdexcept>

namespace postgan::dsp {

template <class S>
Tensor<S> fractional_resample(const Tensor<S>& x, const Ratio& ratio) {
  if (x.shape.size() != 2)
    throw std::invalid_argument("fractional_resample: expected (channels, time)");
  const int64_t ch = x.shape[0];
  const int64_t in_len = x.shape[1];
  const int64_t out_len = resample_out_len(in_len, ratio);
  Tensor<S> y({ch, out_len});
  if (ratio.is_one()) {
    y.data = x.data;
    return y;
  }
  const bool up = ratio.num > ratio.den;
  for (int64_t c = 0; c < ch; ++c) {
    const S* in = x.row(c);
    S* out = y.row(c);
    for (int64_t m = 0; m < out_len; ++m) {
      const ResamplePoint p = resample_source(m, ratio);
      if (p.rem == 0) {
        out[m] = in[p.i0];
      } else if (up) {
        const S xm1 = p.i0 >= 1 ? in[p.i0 - 1] : S(0);
        out[m] = resample_mix_up(in[p.i0], xm1, resample_frac<S>(p.rem, ratio));
      } else {
        out[m] = resample_mix_down(in[p.i0], in[p.i0 + 1], resample_frac<S>(p.rem, ratio));
      }
    }
  }
  return y;
}

template <class S>
Tensor<S> fractional_resample_step(const Tensor<S>& chunk, const Ratio& ratio,
                                   ResampleState<S>& state) {
  if (chunk.shape.size() != 2 || chunk.shape[0] != state.channels)
    throw std::invalid_argument("fractional_resample_step: channel mismatch with state");
  const int64_t ch = state.channels;
  const int64_t n = chunk.shape[1];
  const int64_t total_in = state.in_count + n;
  // Emit exactly the outputs batch mode would have produced by now; every
  // source index they touch is <= total_in - 1 by the causality bound.
  const int64_t target_out = resample_out_len(total_in, ratio);
  const int64_t emit = target_out - state.out_count;
  Tensor<S> y({ch, emit});
  const int64_t H = state.hist_len;
  const int64_t base = state.in_count - H;  // global index of hist[0]
  const bool up = ratio.num > ratio.den;
  for (int64_t c = 0; c < ch; ++c) {
    const S* hist = state.hist.data() + c * H;
    const S* in = chunk.row(c);
    auto fetch = [&](int64_t g) -> S {
      if (g < 0) return S(0);
      const int64_t i = g - base;
      return i < H ? hist[i] : in[i - H];
    };
    S* out = y.row(c);
    for (int64_t k = 0; k < emit; ++k) {
      const int64_t m = state.out_count + k;
      const ResamplePoint p = resample_source(m, ratio);
      if (ratio.is_one()) {
        out[k] = fetch(p.i0);
      } else if (p.rem == 0) {
        out[k] = fetch(p.i0);
      } else if (up) {
        out[k] = resample_mix_up(fetch(p.i0), fetch(p.i0 - 1), resample_frac<S>(p.rem, ratio));
      } else {
        out[k] = resample_mix_down(fetch(p.i0), fetch(p.i0 + 1), resample_frac<S>(p.rem, ratio));
      }
    }
  }
  // Slide the retained history window to the newest H source samples.
  for (int64_t c = 0; c < ch; ++c) {
    S* hist = state.hist.data() + c * H;
    const S* in = chunk.row(c);
    std::vector<S> next(static_cast<size_t>(H));
    for (int64_t i = 0; i < H; ++i) {
      const int64_t g = n - H + i;  // chunk-local
      next[static_cast<size_t>(i)] = g >= 0 ? in[g] : (g + H >= 0 ? hist[g + H] : S(0));
    }
    std::copy(next.begin(), next.end(), hist);
  }
  state.in_count = total_in;
  state.out_count = target_out;
  return y;
}

#define POSTGAN_INSTANTIATE_RESAMPLE(S)                                          \
  template Tensor<S> fractional_resample<S>(const Tensor<S>&, const Ratio&);     \
  template Tensor<S> fractional_resample_step<S>(const Tensor<S>&, const Ratio&, \
                                                 ResampleState<S>&);

POSTGAN_INSTANTIATE_RESAMPLE(float)
POSTGAN_INSTANTIATE_RESAMPLE(double)

}  // namespace postgan::dsp
