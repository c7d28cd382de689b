#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

namespace postgan {

// In-place iterative radix-2 complex FFT. Sizes used by the pipeline are all
// powers of two (512..2048), so nothing fancier is needed.
template <class S>
void fft_inplace(std::vector<std::complex<S>>& a, bool inverse) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const S sign = inverse ? S(1) : S(-1);
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * 3.14159265358979323846 / double(len);
    const std::complex<S> wl(S(std::cos(ang)), S(std::sin(ang)));
    for (size_t i = 0; i < n; i += len) {
      std::complex<S> w(1);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<S> u = a[i + k];
        const std::complex<S> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    const S inv = S(1) / S(n);
    for (auto& x : a) x *= inv;
  }
}

}  // namespace postgan
