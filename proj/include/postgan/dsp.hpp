#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <vector>

#include "postgan/common.hpp"
#include "postgan/tensor.hpp"

namespace postgan::dsp {

// ---------------------------------------------------------------------------
// PQMF filter bank
// ---------------------------------------------------------------------------

// Cosine-modulated near-perfect-reconstruction filter bank. All filters are
// derived deterministically from (num_bands, taps, kaiser_beta, cutoff_ratio).
// The analysis->synthesis chain is LTI with group delay taps-1 samples.
struct PqmfBank {
  int num_bands = 1;
  int taps = 1;
  double kaiser_beta = 9.0;
  double cutoff_ratio = 0.25;
  std::vector<double> prototype;                // length taps
  std::vector<std::vector<double>> analysis;    // num_bands x taps
  std::vector<std::vector<double>> synthesis;   // num_bands x taps

  bool identity() const { return num_bands == 1; }
  int delay() const { return identity() ? 0 : taps - 1; }
};

// Kaiser-window lowpass seed followed by a fixed number of Gauss-Newton
// refinement passes that flatten the composite response (Nyquist condition on
// the prototype autocorrelation at stride 2B) under a stopband penalty
// anchored at 2*pi*cutoff_ratio. num_bands == 1 with taps == 1 yields the
// identity passthrough bank.
PqmfBank design_pqmf(int num_bands, int taps, double kaiser_beta, double cutoff_ratio);

template <class S>
struct SubbandSignal {
  Tensor<S> bands;       // (num_bands, length)
  int64_t padded = 0;    // zero samples appended to make the input divisible
  int source_rate = 16000;
};

// Causal filter + decimate on the grid t = B*m. Inputs not divisible by B are
// zero-padded; the pad count is reported in the result.
template <class S>
SubbandSignal<S> pqmf_analysis(const std::vector<S>& signal, const PqmfBank& bank);

// Upsample, filter, sum. Reproduces the analysis input delayed by taps-1.
template <class S>
std::vector<S> pqmf_synthesis(const SubbandSignal<S>& sub, const PqmfBank& bank);

template <class S>
Tensor<S> pqmf_analysis_tensor(const Tensor<S>& signal, const PqmfBank& bank);
template <class S>
Tensor<S> pqmf_synthesis_tensor(const Tensor<S>& bands, const PqmfBank& bank);

// Streaming states keep exactly the history a causal batch run would see, so
// chunked output is bit-identical to batch output.
template <class S>
struct PqmfAnalysisState {
  std::vector<S> hist;  // last taps-1 input samples
  void reset(const PqmfBank& bank) { hist.assign(bank.taps > 0 ? bank.taps - 1 : 0, S(0)); }
};

template <class S>
struct PqmfSynthesisState {
  Tensor<S> hist;  // (num_bands, hist_len) most recent subband samples
  int hist_len = 0;
  void reset(const PqmfBank& bank);
};

template <class S>
Tensor<S> pqmf_analysis_step(const S* chunk, int64_t n, const PqmfBank& bank,
                             PqmfAnalysisState<S>& state);
template <class S>
std::vector<S> pqmf_synthesis_step(const Tensor<S>& sub_chunk, const PqmfBank& bank,
                                   PqmfSynthesisState<S>& state);

// ---------------------------------------------------------------------------
// STFT / mel
// ---------------------------------------------------------------------------

template <class S>
struct ComplexSpectrogram {
  std::vector<std::vector<std::complex<S>>> frames;  // frames x bins
  int fft_size = 0;
  int hop = 0;
  int window_length = 0;
  int64_t num_frames() const { return static_cast<int64_t>(frames.size()); }
  int bins() const { return fft_size / 2 + 1; }
};

std::vector<double> hann_window(int length);  // periodic

// Frame f starts at f*hop; frame count = floor((len - window)/hop) + 1.
// No padding is applied here.
template <class S>
ComplexSpectrogram<S> stft(const std::vector<S>& signal, int fft_size, int hop,
                           int window_length);

struct MelConfig {
  int sample_rate = 16000;
  int hop = 160;
  int window = 640;
  int fft_size = 1024;
  int num_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-5;
};

// Triangular mel filterbank (HTK mel scale, unit-peak triangles),
// rows x (fft/2+1).
std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg);

// log(max(filterbank . |STFT|, floor)) with frames centered at f*hop:
// the signal is padded with window/2 zeros on the left and just enough on the
// right to complete ceil(len/hop) frames.
template <class S>
Tensor<S> mel_spectrogram(const std::vector<S>& signal, const MelConfig& cfg);

// Single mel frame over one already-extracted window of cfg.window samples.
// Streaming path; identical arithmetic to the batch frames.
template <class S>
void mel_frame(const S* window, const MelConfig& cfg,
               const std::vector<std::vector<double>>& bank, S* out);

// ---------------------------------------------------------------------------
// Fractional resampling
// ---------------------------------------------------------------------------

// Output m sits at source position m*den/num (ratio = out rate / in rate).
// Downsampling interpolates between floor and ceil neighbours; upsampling
// predicts from the two most recent samples so no future input is touched.
// Output length = floor(len * num / den).
template <class S>
Tensor<S> fractional_resample(const Tensor<S>& x, const Ratio& ratio);

inline int64_t resample_out_len(int64_t in_len, const Ratio& ratio) {
  return in_len * ratio.num / ratio.den;
}

// Source position of output m, split into integer part and remainder so every
// caller (batch, streaming, gradient) derives bit-identical coefficients.
struct ResamplePoint {
  int64_t i0;   // floor(m*den/num)
  int64_t rem;  // m*den - i0*num, in [0, num)
};
inline ResamplePoint resample_source(int64_t m, const Ratio& ratio) {
  const int64_t num = m * ratio.den;
  return {num / ratio.num, num % ratio.num};
}
template <class S>
inline S resample_frac(int64_t rem, const Ratio& ratio) {
  return static_cast<S>(static_cast<double>(rem) / static_cast<double>(ratio.num));
}
// Downsampling: interpolate toward the next sample.
template <class S>
inline S resample_mix_down(S x0, S x1, S f) {
  return static_cast<S>(x0 + f * (x1 - x0));
}
// Upsampling: extrapolate from the two most recent samples (xm1 precedes x0).
template <class S>
inline S resample_mix_up(S x0, S xm1, S f) {
  return static_cast<S>(x0 + f * (x0 - xm1));
}

template <class S>
struct ResampleState {
  int64_t in_count = 0;   // source samples consumed
  int64_t out_count = 0;  // outputs emitted
  int64_t channels = 0;
  int64_t hist_len = 0;   // retained trailing source samples per channel
  std::vector<S> hist;    // channels x hist_len, oldest first, zero-initialized
  void reset(int64_t num_channels, const Ratio& ratio) {
    in_count = out_count = 0;
    channels = num_channels;
    hist_len = std::max<int64_t>(3, (ratio.den + ratio.num - 1) / ratio.num + 2);
    hist.assign(static_cast<size_t>(channels * hist_len), S(0));
  }
};

// Emits every output whose source dependencies are satisfied by the samples
// seen so far; arbitrary chunk sizes compose to the batch result exactly.
template <class S>
Tensor<S> fractional_resample_step(const Tensor<S>& chunk, const Ratio& ratio,
                                   ResampleState<S>& state);

}  // namespace postgan::dsp
