#include "postgan/dsp.hpp"

#include <cmath>
#include <stdexcept>

#include "postgan/fft.hpp"

namespace postgan::dsp {

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

std::vector<std::vector<double>> mel_filterbank(const MelConfig& cfg) {
  if (cfg.num_mels < 1) throw std::invalid_argument("mel_filterbank: num_mels must be >= 1");
  if (!(cfg.fmax > cfg.fmin))
    throw std::invalid_argument("mel_filterbank: fmax must exceed fmin");
  const int bins = cfg.fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(static_cast<size_t>(cfg.num_mels) + 2);
  for (size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(i) / (cfg.num_mels + 1));

  std::vector<std::vector<double>> bank(static_cast<size_t>(cfg.num_mels),
                                        std::vector<double>(static_cast<size_t>(bins), 0.0));
  for (int m = 0; m < cfg.num_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = double(k) * cfg.sample_rate / cfg.fft_size;
      double w = 0.0;
      if (f > lo && f < hi)
        w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      bank[m][k] = std::max(0.0, w);
    }
  }
  return bank;
}

template <class S>
void mel_frame(const S* window, const MelConfig& cfg,
               const std::vector<std::vector<double>>& bank, S* out) {
  static thread_local std::vector<double> hann;
  if (static_cast<int>(hann.size()) != cfg.window) hann = hann_window(cfg.window);
  std::vector<std::complex<double>> buf(static_cast<size_t>(cfg.fft_size),
                                        std::complex<double>(0.0, 0.0));
  for (int n = 0; n < cfg.window; ++n)
    buf[static_cast<size_t>(n)] = hann[n] * static_cast<double>(window[n]);
  fft_inplace(buf, false);
  const int bins = cfg.fft_size / 2 + 1;
  std::vector<double> mag(static_cast<size_t>(bins));
  for (int k = 0; k < bins; ++k) mag[k] = std::abs(buf[static_cast<size_t>(k)]);
  for (int m = 0; m < cfg.num_mels; ++m) {
    double acc = 0.0;
    for (int k = 0; k < bins; ++k) acc += bank[m][k] * mag[k];
    out[m] = static_cast<S>(std::log(std::max(acc, cfg.log_floor)));
  }
}

template <class S>
Tensor<S> mel_spectrogram(const std::vector<S>& signal, const MelConfig& cfg) {
  if (cfg.hop <= 0) throw std::invalid_argument("mel_spectrogram: hop must be positive");
  if (cfg.window > cfg.fft_size)
    throw std::invalid_argument("mel_spectrogram: window longer than fft_size");
  const int64_t len = static_cast<int64_t>(signal.size());
  const int64_t frames = (len + cfg.hop - 1) / cfg.hop;  // ceil, frame f centered at f*hop
  const int64_t left = cfg.window / 2;
  const int64_t padded_len = frames > 0 ? (frames - 1) * cfg.hop + cfg.window : 0;
  std::vector<S> padded(static_cast<size_t>(std::max<int64_t>(padded_len, left + len)), S(0));
  std::copy(signal.begin(), signal.end(), padded.begin() + left);

  const std::vector<std::vector<double>> bank = mel_filterbank(cfg);
  Tensor<S> out({cfg.num_mels, frames});
  std::vector<S> frame_out(static_cast<size_t>(cfg.num_mels));
  for (int64_t f = 0; f < frames; ++f) {
    mel_frame(padded.data() + f * cfg.hop, cfg, bank, frame_out.data());
    for (int m = 0; m < cfg.num_mels; ++m) out.at(m, f) = frame_out[static_cast<size_t>(m)];
  }
  return out;
}

#define POSTGAN_INSTANTIATE_MEL(S)                                            \
  template void mel_frame<S>(const S*, const MelConfig&,                      \
                             const std::vector<std::vector<double>>&, S*);    \
  template Tensor<S> mel_spectrogram<S>(const std::vector<S>&, const MelConfig&);

POSTGAN_INSTANTIATE_MEL(float)
POSTGAN_INSTANTIATE_MEL(double)

}  // namespace postgan::dsp
