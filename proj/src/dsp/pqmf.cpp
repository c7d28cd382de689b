#include "postgan/dsp.hpp"

#include <cmath>
#include <stdexcept>

namespace postgan::dsp {

namespace {

// Modified Bessel function of the first kind, order zero (power series).
double bessel_i0(double x) {
  const double half = x / 2.0;
  double sum = 1.0;
  double term = 1.0;
  for (int k = 1; k < 512; ++k) {
    const double f = half / k;
    term *= f * f;
    sum += term;
    if (term < sum * 1e-21) break;
  }
  return sum;
}

// Kaiser-windowed sinc lowpass, normalized to unit DC gain.
std::vector<double> seed_prototype(int taps, double cutoff, double beta) {
  std::vector<double> h(taps);
  const double fc = cutoff / 2.0;
  const double denom = bessel_i0(beta);
  double total = 0.0;
  for (int n = 0; n < taps; ++n) {
    const double m = n - (taps - 1) / 2.0;
    double v = std::abs(m) < 1e-9 ? 2.0 * fc : std::sin(2.0 * M_PI * fc * m) / (M_PI * m);
    const double u = taps > 1 ? 2.0 * n / (taps - 1.0) - 1.0 : 0.0;
    v *= bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - u * u))) / denom;
    h[n] = v;
    total += v;
  }
  for (auto& v : h) v /= total;
  return h;
}

// Symmetric fold index: h[n] = half[fold(n)].
int fold_index(int n, int taps, int half_n) { return n < half_n ? n : taps - 1 - n; }

std::vector<double> expand_half(const std::vector<double>& half, int taps) {
  const int half_n = static_cast<int>(half.size());
  std::vector<double> h(taps);
  for (int n = 0; n < taps; ++n) h[n] = half[fold_index(n, taps, half_n)];
  return h;
}

// Cholesky solve of a symmetric positive-definite system (row-major A).
std::vector<double> solve_spd(std::vector<double> A, std::vector<double> b, int n) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = A[i * n + j];
      for (int k = 0; k < j; ++k) s -= A[i * n + k] * A[j * n + k];
      if (i == j) {
        if (s <= 0.0) throw std::runtime_error("design_pqmf: refinement system not PD");
        A[i * n + i] = std::sqrt(s);
      } else {
        A[i * n + j] = s / A[j * n + j];
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= A[i * n + k] * b[k];
    b[i] = s / A[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= A[k * n + i] * b[k];
    b[i] = s / A[i * n + i];
  }
  return b;
}

// Gauss-Newton refinement of the Nyquist condition on g = h*h at stride 2B,
// with an analytic stopband energy penalty above ws. Operates on the
// symmetric half of the prototype; fixed iteration count keeps it
// deterministic.
std::vector<double> refine_prototype(std::vector<double> h, int bands, int taps,
                                     double cutoff) {
  constexpr int kIters = 20;
  constexpr double kLambda = 2e-3;
  constexpr double kRidge = 1e-9;
  const int half_n = (taps + 1) / 2;
  const double ws = std::min(2.0 * M_PI * cutoff, 0.95 * M_PI);

  // Stopband quadratic form folded onto the symmetric half:
  // S[n,m] = (1/pi) * integral_{ws}^{pi} cos(w (n-m)) dw.
  std::vector<double> sh(static_cast<size_t>(half_n) * half_n, 0.0);
  for (int n = 0; n < taps; ++n) {
    for (int m = 0; m < taps; ++m) {
      const int d = n - m;
      const double s = d == 0 ? (M_PI - ws) / M_PI : -std::sin(ws * d) / (M_PI * d);
      sh[fold_index(n, taps, half_n) * half_n + fold_index(m, taps, half_n)] += s;
    }
  }

  std::vector<double> half(h.begin(), h.begin() + half_n);
  const int glen = 2 * taps - 1;
  const int center = taps - 1;
  const int stride = 2 * bands;
  std::vector<int> idx;
  for (int i = center % stride; i < glen; i += stride) idx.push_back(i);
  const int nres = static_cast<int>(idx.size());

  std::vector<double> g(glen), r(nres);
  std::vector<double> jac(static_cast<size_t>(nres) * half_n);
  for (int it = 0; it < kIters; ++it) {
    h = expand_half(half, taps);
    std::fill(g.begin(), g.end(), 0.0);
    for (int a = 0; a < taps; ++a)
      for (int b = 0; b < taps; ++b) g[a + b] += h[a] * h[b];
    for (int j = 0; j < nres; ++j) {
      r[j] = 2.0 * bands * g[idx[j]] - (idx[j] == center ? 1.0 : 0.0);
    }
    // d r_j / d half[a] = sum over full-length taps folding to a of 4B * h[idx_j - n]
    std::fill(jac.begin(), jac.end(), 0.0);
    for (int j = 0; j < nres; ++j) {
      for (int n = 0; n < taps; ++n) {
        const int k = idx[j] - n;
        if (k >= 0 && k < taps)
          jac[j * half_n + fold_index(n, taps, half_n)] += 4.0 * bands * h[k];
      }
    }
    std::vector<double> A(static_cast<size_t>(half_n) * half_n);
    std::vector<double> rhs(half_n);
    for (int a = 0; a < half_n; ++a) {
      for (int b = 0; b < half_n; ++b) {
        double s = 0.0;
        for (int j = 0; j < nres; ++j) s += jac[j * half_n + a] * jac[j * half_n + b];
        A[a * half_n + b] = s + kLambda * sh[a * half_n + b] + (a == b ? kRidge : 0.0);
      }
      double s = 0.0;
      for (int j = 0; j < nres; ++j) s += jac[j * half_n + a] * r[j];
      for (int b = 0; b < half_n; ++b) s += kLambda * sh[a * half_n + b] * half[b];
      rhs[a] = s;
    }
    const std::vector<double> delta = solve_spd(std::move(A), std::move(rhs), half_n);
    for (int a = 0; a < half_n; ++a) half[a] -= delta[a];
  }
  return expand_half(half, taps);
}

}  // namespace

PqmfBank design_pqmf(int num_bands, int taps, double kaiser_beta, double cutoff_ratio) {
  if (num_bands < 1) throw std::invalid_argument("design_pqmf: num_bands must be >= 1");
  PqmfBank bank;
  bank.kaiser_beta = kaiser_beta;
  bank.cutoff_ratio = cutoff_ratio;
  if (num_bands == 1) {
    // Degenerate single-band bank: identity passthrough with zero delay.
    bank.num_bands = 1;
    bank.taps = 1;
    bank.prototype = {1.0};
    bank.analysis = {{1.0}};
    bank.synthesis = {{1.0}};
    return bank;
  }
  if (taps < 2 * num_bands)
    throw std::invalid_argument("design_pqmf: taps must be >= 2*num_bands");
  if (!(cutoff_ratio > 0.0 && cutoff_ratio < 0.5))
    throw std::invalid_argument("design_pqmf: cutoff_ratio must lie in (0, 0.5)");

  std::vector<double> h = seed_prototype(taps, cutoff_ratio, kaiser_beta);
  double energy = 0.0;
  for (double v : h) energy += v * v;
  const double scale = 1.0 / std::sqrt(2.0 * num_bands * energy);
  for (auto& v : h) v *= scale;
  h = refine_prototype(std::move(h), num_bands, taps, cutoff_ratio);

  bank.num_bands = num_bands;
  bank.taps = taps;
  bank.prototype = h;
  bank.analysis.assign(num_bands, std::vector<double>(taps));
  bank.synthesis.assign(num_bands, std::vector<double>(taps));
  // sqrt(B) folded into both filter sets: subband energy matches input energy
  // and the synthesis chain needs no separate gain.
  const double gain = 2.0 * std::sqrt(static_cast<double>(num_bands));
  for (int k = 0; k < num_bands; ++k) {
    const double phase = (k % 2 == 0 ? 1.0 : -1.0) * M_PI / 4.0;
    for (int n = 0; n < taps; ++n) {
      const double m = n - (taps - 1) / 2.0;
      const double arg = (2.0 * k + 1.0) * M_PI / (2.0 * num_bands) * m;
      bank.analysis[k][n] = gain * h[n] * std::cos(arg + phase);
      bank.synthesis[k][n] = gain * h[n] * std::cos(arg - phase);
    }
  }
  return bank;
}

namespace {

// Shared analysis kernel: out[b][m] = sum_j ana[b][j] * x(t0 + B*m - j), with
// x(i) fetched through `sample` (returns 0 left of the stream start). The tap
// loop order is fixed so batch and streaming accumulate identically.
template <class S, class Fetch>
void analyze_rows(Tensor<S>& out, int64_t out_len, const PqmfBank& bank, Fetch sample) {
  const int B = bank.num_bands;
  for (int b = 0; b < B; ++b) {
    S* row = out.row(b);
    for (int64_t m = 0; m < out_len; ++m) {
      const int64_t t = B * m;
      double acc = 0.0;
      for (int j = 0; j < bank.taps; ++j) acc += bank.analysis[b][j] * sample(t - j);
      row[m] = static_cast<S>(acc);
    }
  }
}

// Shared synthesis kernel: y[t] = sum_b sum_m syn[b][t - B*m] * v[b](m)
// (zero-stuffed upsample, filter, sum across bands).
template <class S, class Fetch>
void synthesize_rows(S* out, int64_t out_len, int64_t t0, const PqmfBank& bank,
                     Fetch band_sample) {
  const int B = bank.num_bands;
  const int T = bank.taps;
  for (int64_t i = 0; i < out_len; ++i) {
    const int64_t t = t0 + i;
    const int64_t m_lo = (t - T + 1 + B - 1) >= 0 ? (t - T + 1 + B - 1) / B : 0;
    const int64_t m_hi = t / B;
    double acc = 0.0;
    for (int b = 0; b < B; ++b) {
      for (int64_t m = m_lo; m <= m_hi; ++m) {
        const int j = static_cast<int>(t - B * m);
        acc += bank.synthesis[b][j] * band_sample(b, m);
      }
    }
    out[i] = static_cast<S>(acc);
  }
}

}  // namespace

template <class S>
SubbandSignal<S> pqmf_analysis(const std::vector<S>& signal, const PqmfBank& bank) {
  const int B = bank.num_bands;
  const int64_t len = static_cast<int64_t>(signal.size());
  const int64_t pad = (B - len % B) % B;
  const int64_t out_len = (len + pad) / B;
  SubbandSignal<S> sub;
  sub.padded = pad;
  sub.bands = Tensor<S>({B, out_len});
  analyze_rows(sub.bands, out_len, bank, [&](int64_t i) -> double {
    return (i >= 0 && i < len) ? static_cast<double>(signal[static_cast<size_t>(i)]) : 0.0;
  });
  return sub;
}

template <class S>
std::vector<S> pqmf_synthesis(const SubbandSignal<S>& sub, const PqmfBank& bank) {
  if (sub.bands.shape[0] != bank.num_bands)
    throw std::invalid_argument("pqmf_synthesis: band count does not match bank");
  const int64_t in_len = sub.bands.shape[1];
  std::vector<S> out(static_cast<size_t>(bank.num_bands * in_len));
  synthesize_rows(out.data(), static_cast<int64_t>(out.size()), 0, bank,
                  [&](int b, int64_t m) -> double {
                    return m >= 0 && m < in_len
                               ? static_cast<double>(sub.bands.at(b, m))
                               : 0.0;
                  });
  return out;
}

template <class S>
Tensor<S> pqmf_analysis_tensor(const Tensor<S>& signal, const PqmfBank& bank) {
  if (signal.shape.size() != 2 || signal.shape[0] != 1)
    throw std::invalid_argument("pqmf_analysis_tensor: expected shape (1, time)");
  std::vector<S> x(signal.data.begin(), signal.data.end());
  SubbandSignal<S> sub = pqmf_analysis(x, bank);
  return sub.bands;
}

template <class S>
Tensor<S> pqmf_synthesis_tensor(const Tensor<S>& bands, const PqmfBank& bank) {
  if (bands.shape.size() != 2 || bands.shape[0] != bank.num_bands)
    throw std::invalid_argument("pqmf_synthesis_tensor: band count does not match bank");
  SubbandSignal<S> sub;
  sub.bands = bands;
  std::vector<S> y = pqmf_synthesis(sub, bank);
  Tensor<S> out({1, static_cast<int64_t>(y.size())});
  std::copy(y.begin(), y.end(), out.data.begin());
  return out;
}

template <class S>
void PqmfSynthesisState<S>::reset(const PqmfBank& bank) {
  hist_len = (bank.taps + bank.num_bands - 1) / bank.num_bands;
  hist = Tensor<S>({bank.num_bands, hist_len});
}

template <class S>
Tensor<S> pqmf_analysis_step(const S* chunk, int64_t n, const PqmfBank& bank,
                             PqmfAnalysisState<S>& state) {
  const int B = bank.num_bands;
  if (n % B != 0)
    throw std::invalid_argument("pqmf_analysis_step: chunk length must be divisible by num_bands");
  const int64_t hlen = static_cast<int64_t>(state.hist.size());
  const int64_t out_len = n / B;
  Tensor<S> out({B, out_len});
  // Chunk-local time t corresponds to ext index t + hlen over [hist | chunk].
  analyze_rows(out, out_len, bank, [&](int64_t t) -> double {
    const int64_t i = t + hlen;
    return i < hlen ? static_cast<double>(state.hist[static_cast<size_t>(i)])
                    : static_cast<double>(chunk[i - hlen]);
  });
  // Retain the most recent taps-1 input samples.
  if (hlen > 0) {
    std::vector<S> next(static_cast<size_t>(hlen));
    for (int64_t i = 0; i < hlen; ++i) {
      const int64_t g = n - hlen + i;  // chunk-local index, may reach into old hist
      next[static_cast<size_t>(i)] =
          g >= 0 ? chunk[g] : state.hist[static_cast<size_t>(g + hlen)];
    }
    state.hist = std::move(next);
  }
  return out;
}

template <class S>
std::vector<S> pqmf_synthesis_step(const Tensor<S>& sub_chunk, const PqmfBank& bank,
                                   PqmfSynthesisState<S>& state) {
  const int B = bank.num_bands;
  if (sub_chunk.shape.size() != 2 || sub_chunk.shape[0] != B)
    throw std::invalid_argument("pqmf_synthesis_step: band count does not match bank");
  const int64_t n = sub_chunk.shape[1];
  const int64_t H = state.hist_len;
  std::vector<S> out(static_cast<size_t>(B * n));
  // Global subband index m maps to ext index m + H relative to this chunk's
  // first new sample; outputs cover global times [B*H, B*(H+n)) in ext terms.
  synthesize_rows(out.data(), static_cast<int64_t>(out.size()), B * H, bank,
                  [&](int b, int64_t m) -> double {
                    if (m < H) return static_cast<double>(state.hist.at(b, m));
                    return static_cast<double>(sub_chunk.at(b, m - H));
                  });
  if (H > 0) {
    Tensor<S> next({B, H});
    for (int b = 0; b < B; ++b) {
      for (int64_t i = 0; i < H; ++i) {
        const int64_t g = n - H + i;
        next.at(b, i) = g >= 0 ? sub_chunk.at(b, g) : state.hist.at(b, g + H);
      }
    }
    state.hist = std::move(next);
  }
  return out;
}

#define POSTGAN_INSTANTIATE_PQMF(S)                                                       \
  template SubbandSignal<S> pqmf_analysis<S>(const std::vector<S>&, const PqmfBank&);     \
  template std::vector<S> pqmf_synthesis<S>(const SubbandSignal<S>&, const PqmfBank&);    \
  template Tensor<S> pqmf_analysis_tensor<S>(const Tensor<S>&, const PqmfBank&);          \
  template Tensor<S> pqmf_synthesis_tensor<S>(const Tensor<S>&, const PqmfBank&);         \
  template struct PqmfSynthesisState<S>;                                                  \
  template Tensor<S> pqmf_analysis_step<S>(const S*, int64_t, const PqmfBank&,            \
                                           PqmfAnalysisState<S>&);                        \
  template std::vector<S> pqmf_synthesis_step<S>(const Tensor<S>&, const PqmfBank&,       \
                                                 PqmfSynthesisState<S>&);

POSTGAN_INSTANTIATE_PQMF(float)
POSTGAN_INSTANTIATE_PQMF(double)

}  // namespace postgan::dsp
