#include "postgan/dsp.hpp"

#include <cmath>
#include <stdexcept>

#include "postgan/fft.hpp"

namespace postgan::dsp {

std::vector<double> hann_window(int length) {
  std::vector<double> w(length);
  for (int n = 0; n < length; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / length);  // periodic form
  return w;
}

template <class S>
ComplexSpectrogram<S> stft(const std::vector<S>& signal, int fft_size, int hop,
                           int window_length) {
  if (hop <= 0) throw std::invalid_argument("stft: hop must be positive");
  if (window_length > fft_size)
    throw std::invalid_argument("stft: window longer than fft_size");
  if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0)
    throw std::invalid_argument("stft: fft_size must be a power of two");

  ComplexSpectrogram<S> out;
  out.fft_size = fft_size;
  out.hop = hop;
  out.window_length = window_length;
  const int64_t len = static_cast<int64_t>(signal.size());
  const int64_t frames = len < window_length ? 0 : (len - window_length) / hop + 1;
  const std::vector<double> w = hann_window(window_length);
  const int bins = fft_size / 2 + 1;
  out.frames.assign(static_cast<size_t>(frames), {});

  std::vector<std::complex<double>> buf(static_cast<size_t>(fft_size));
  for (int64_t f = 0; f < frames; ++f) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    const int64_t start = f * hop;
    for (int n = 0; n < window_length; ++n)
      buf[static_cast<size_t>(n)] = w[n] * static_cast<double>(signal[start + n]);
    fft_inplace(buf, false);
    auto& row = out.frames[static_cast<size_t>(f)];
    row.resize(static_cast<size_t>(bins));
    for (int k = 0; k < bins; ++k)
      row[static_cast<size_t>(k)] = std::complex<S>(static_cast<S>(buf[k].real()),
                                                    static_cast<S>(buf[k].imag()));
  }
  return out;
}

template ComplexSpectrogram<float> stft<float>(const std::vector<float>&, int, int, int);
template ComplexSpectrogram<double> stft<double>(const std::vector<double>&, int, int, int);

}  // namespace postgan::dsp
