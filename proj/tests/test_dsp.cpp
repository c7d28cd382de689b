#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "postgan/common.hpp"
#include "postgan/dsp.hpp"

using namespace postgan;
using namespace postgan::dsp;

namespace {

std::vector<double> white_noise(int64_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(static_cast<size_t>(n));
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

// Reconstruction SNR of the analysis->synthesis chain after removing the
// group delay and the leading transient.
double reconstruction_snr(const std::vector<double>& x, const PqmfBank& bank) {
  SubbandSignal<double> sub = pqmf_analysis(x, bank);
  std::vector<double> y = pqmf_synthesis(sub, bank);
  const int64_t d = bank.delay();
  const int64_t skip = 200;
  double num = 0.0, den = 0.0;
  for (int64_t t = skip; t + d < static_cast<int64_t>(y.size()) &&
                         t < static_cast<int64_t>(x.size()) - d;
       ++t) {
    const double e = x[static_cast<size_t>(t)] - y[static_cast<size_t>(t + d)];
    num += x[static_cast<size_t>(t)] * x[static_cast<size_t>(t)];
    den += e * e;
  }
  return 10.0 * std::log10(num / den);
}

}  // namespace

TEST_CASE("design_pqmf rejects invalid arguments") {
  CHECK_THROWS(design_pqmf(0, 62, 9.0, 0.142));
  CHECK_THROWS(design_pqmf(-2, 62, 9.0, 0.142));
  CHECK_THROWS(design_pqmf(4, 6, 9.0, 0.142));
  CHECK_THROWS(design_pqmf(4, 62, 9.0, 0.0));
  CHECK_THROWS(design_pqmf(4, 62, 9.0, 0.5));
  CHECK_THROWS(design_pqmf(4, 62, 9.0, -0.1));
}

TEST_CASE("single-band bank is the identity with zero delay") {
  const PqmfBank bank = design_pqmf(1, 1, 9.0, 0.25);
  CHECK(bank.delay() == 0);
  const std::vector<double> x = white_noise(257, 11);
  SubbandSignal<double> sub = pqmf_analysis(x, bank);
  REQUIRE(sub.bands.shape == std::vector<int64_t>{1, 257});
  CHECK(sub.padded == 0);
  for (size_t i = 0; i < x.size(); ++i) CHECK(sub.bands.data[i] == doctest::Approx(x[i]).epsilon(1e-12));
  const std::vector<double> y = pqmf_synthesis(sub, bank);
  for (size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("PQMF reconstruction SNR over ten noise draws") {
  // B in {2, 4}, 62 taps: >= 50 dB against the delayed input.
  for (auto [bands, cutoff] : {std::pair<int, double>{4, 0.142}, {2, 0.25}}) {
    const PqmfBank bank = design_pqmf(bands, 62, 9.0, cutoff);
    CHECK(bank.delay() == 61);
    for (uint64_t seed = 0; seed < 10; ++seed) {
      const double snr = reconstruction_snr(white_noise(16000, 100 + seed), bank);
      INFO("B=", bands, " seed=", seed, " snr=", snr);
      CHECK(snr >= 50.0);
    }
  }
}

TEST_CASE("pqmf_analysis basics") {
  const PqmfBank bank = design_pqmf(4, 62, 9.0, 0.142);

  SUBCASE("zero in, zero out") {
    const std::vector<double> x(1024, 0.0);
    SubbandSignal<double> sub = pqmf_analysis(x, bank);
    for (double v : sub.bands.data) CHECK(v == 0.0);
  }

  SUBCASE("unit impulse yields decimated filter taps") {
    std::vector<double> x(256, 0.0);
    x[0] = 1.0;
    SubbandSignal<double> sub = pqmf_analysis(x, bank);
    for (int b = 0; b < 4; ++b) {
      for (int64_t m = 0; m < sub.bands.shape[1]; ++m) {
        const int64_t j = 4 * m;
        const double want = j < bank.taps ? bank.analysis[b][static_cast<size_t>(j)] : 0.0;
        CHECK(sub.bands.at(b, m) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }

  SUBCASE("length padding is reported") {
    const std::vector<double> x(1001, 0.25);
    SubbandSignal<double> sub = pqmf_analysis(x, bank);
    CHECK(sub.padded == 3);
    CHECK(sub.bands.shape[1] == 251);
  }

  SUBCASE("subband energies sum to input energy within 1%") {
    const std::vector<double> x = white_noise(16000, 21);
    SubbandSignal<double> sub = pqmf_analysis(x, bank);
    double e_in = 0.0, e_sub = 0.0;
    for (double v : x) e_in += v * v;
    for (double v : sub.bands.data) e_sub += v * v;
    CHECK(e_sub / e_in == doctest::Approx(1.0).epsilon(0.01));
  }

  SUBCASE("causal: zeroing the future changes only later band samples") {
    const std::vector<double> x = white_noise(4096, 5);
    const int64_t t = 1000;
    std::vector<double> trunc = x;
    for (int64_t i = t + 1; i < 4096; ++i) trunc[static_cast<size_t>(i)] = 0.0;
    SubbandSignal<double> a = pqmf_analysis(x, bank);
    SubbandSignal<double> b = pqmf_analysis(trunc, bank);
    for (int band = 0; band < 4; ++band)
      for (int64_t m = 0; 4 * m <= t; ++m)
        CHECK(a.bands.at(band, m) == b.bands.at(band, m));
  }
}

TEST_CASE("pqmf_synthesis basics") {
  const PqmfBank bank = design_pqmf(4, 62, 9.0, 0.142);

  SUBCASE("zero subbands give zero output") {
    SubbandSignal<double> sub;
    sub.bands = TensorD({4, 64});
    const std::vector<double> y = pqmf_synthesis(sub, bank);
    for (double v : y) CHECK(v == 0.0);
  }

  SUBCASE("band-count mismatch rejected") {
    SubbandSignal<double> sub;
    sub.bands = TensorD({2, 64});
    CHECK_THROWS(pqmf_synthesis(sub, bank));
  }
}

TEST_CASE("PQMF streaming matches batch bit for bit") {
  const PqmfBank bank = design_pqmf(4, 62, 9.0, 0.142);
  const std::vector<float> xd = [&] {
    std::vector<double> w = white_noise(3200, 77);
    return std::vector<float>(w.begin(), w.end());
  }();

  SubbandSignal<float> batch = pqmf_analysis(xd, bank);
  const std::vector<float> batch_out = pqmf_synthesis(batch, bank);

  PqmfAnalysisState<float> astate;
  astate.reset(bank);
  PqmfSynthesisState<float> sstate;
  sstate.reset(bank);
  std::vector<float> stream_out;
  TensorF stream_sub({4, 0});
  Rng rng(9);
  int64_t pos = 0;
  while (pos < static_cast<int64_t>(xd.size())) {
    // chunk sizes vary but stay multiples of the band count
    int64_t n = 4 * static_cast<int64_t>(1 + rng.below(40));
    n = std::min<int64_t>(n, static_cast<int64_t>(xd.size()) - pos);
    TensorF sub = pqmf_analysis_step(xd.data() + pos, n, bank, astate);
    for (int b = 0; b < 4; ++b)
      for (int64_t m = 0; m < sub.shape[1]; ++m) {
        CHECK(sub.at(b, m) == batch.bands.at(b, pos / 4 + m));
      }
    const std::vector<float> y = pqmf_synthesis_step(sub, bank, sstate);
    stream_out.insert(stream_out.end(), y.begin(), y.end());
    pos += n;
  }
  REQUIRE(stream_out.size() == batch_out.size());
  for (size_t i = 0; i < batch_out.size(); ++i) CHECK(stream_out[i] == batch_out[i]);
}

TEST_CASE("stft argument validation") {
  const std::vector<double> x(512, 0.0);
  CHECK_THROWS(stft(x, 256, 0, 256));
  CHECK_THROWS(stft(x, 256, 64, 512));
  CHECK_THROWS(stft(x, 300, 64, 256));
}

TEST_CASE("stft of zero input is zero") {
  const std::vector<double> x(2048, 0.0);
  ComplexSpectrogram<double> spec = stft(x, 512, 128, 512);
  CHECK(spec.num_frames() == 13);
  CHECK(spec.bins() == 257);
  for (const auto& f : spec.frames)
    for (auto v : f) CHECK(std::abs(v) == 0.0);
}

TEST_CASE("stft concentrates a bin-centered sinusoid") {
  const int N = 512;
  const int k = 32;
  std::vector<double> x(static_cast<size_t>(N));
  for (int n = 0; n < N; ++n) x[static_cast<size_t>(n)] = std::sin(2.0 * M_PI * k * n / N);
  ComplexSpectrogram<double> spec = stft(x, N, N, N);
  REQUIRE(spec.num_frames() == 1);
  double total = 0.0, main_lobe = 0.0;
  for (int b = 0; b < spec.bins(); ++b) {
    const double w = (b == 0 || b == N / 2) ? 1.0 : 2.0;  // one-sided doubling
    const double e = w * std::norm(spec.frames[0][static_cast<size_t>(b)]);
    total += e;
    if (std::abs(b - k) <= 1) main_lobe += e;
  }
  // Hann analysis spreads a pure tone over the 3-bin main lobe; that lobe
  // carries essentially all of the frame energy.
  CHECK(main_lobe / total >= 0.99);
}

TEST_CASE("stft matches a naive DFT oracle") {
  const std::vector<double> x = white_noise(2048, 303);
  const int fft = 512, hop = 200, win = 400;
  ComplexSpectrogram<double> spec = stft(x, fft, hop, win);
  const std::vector<double> w = hann_window(win);
  REQUIRE(spec.num_frames() == (2048 - win) / hop + 1);
  for (int64_t f = 0; f < spec.num_frames(); ++f) {
    for (int k = 0; k <= fft / 2; ++k) {
      std::complex<double> acc(0.0, 0.0);
      for (int n = 0; n < win; ++n) {
        const double ang = -2.0 * M_PI * k * n / fft;
        acc += w[n] * x[static_cast<size_t>(f * hop + n)] *
               std::complex<double>(std::cos(ang), std::sin(ang));
      }
      const std::complex<double> got = spec.frames[static_cast<size_t>(f)][static_cast<size_t>(k)];
      CHECK(std::abs(got - acc) <= 1e-4 * std::max(1.0, std::abs(acc)));
    }
  }
}

TEST_CASE("stft satisfies Parseval per frame") {
  const std::vector<double> x = white_noise(4096, 40);
  const int fft = 1024, hop = 256, win = 640;
  ComplexSpectrogram<double> spec = stft(x, fft, hop, win);
  const std::vector<double> w = hann_window(win);
  for (int64_t f = 0; f < spec.num_frames(); ++f) {
    double time_e = 0.0;
    for (int n = 0; n < win; ++n) {
      const double v = w[n] * x[static_cast<size_t>(f * hop + n)];
      time_e += v * v;
    }
    double freq_e = 0.0;
    for (int k = 0; k <= fft / 2; ++k) {
      const double weight = (k == 0 || k == fft / 2) ? 1.0 : 2.0;
      freq_e += weight * std::norm(spec.frames[static_cast<size_t>(f)][static_cast<size_t>(k)]);
    }
    freq_e /= fft;
    CHECK(freq_e == doctest::Approx(time_e).epsilon(1e-3));
  }
}

TEST_CASE("mel_spectrogram framing") {
  MelConfig cfg;

  SUBCASE("one second gives exactly 100 frames") {
    const std::vector<double> x = white_noise(16000, 8);
    TensorD mel = mel_spectrogram(x, cfg);
    CHECK(mel.shape == std::vector<int64_t>{80, 100});
  }

  SUBCASE("frame count is ceil(len/hop)") {
    CHECK(mel_spectrogram(white_noise(16001, 8), cfg).shape[1] == 101);
    CHECK(mel_spectrogram(white_noise(160, 8), cfg).shape[1] == 1);
    CHECK(mel_spectrogram(white_noise(1, 8), cfg).shape[1] == 1);
  }

  SUBCASE("zero input sits at the log floor") {
    const std::vector<double> x(3200, 0.0);
    TensorD mel = mel_spectrogram(x, cfg);
    for (double v : mel.data) CHECK(v == doctest::Approx(std::log(1e-5)).epsilon(1e-12));
  }

  SUBCASE("hop-shifted input reproduces frames bit for bit") {
    const std::vector<double> x = white_noise(16000, 13);
    std::vector<double> shifted(static_cast<size_t>(cfg.hop), 0.0);
    shifted.insert(shifted.end(), x.begin(), x.end());
    TensorD a = mel_spectrogram(x, cfg);
    TensorD b = mel_spectrogram(shifted, cfg);
    REQUIRE(b.shape[1] == a.shape[1] + 1);
    for (int m = 0; m < 80; ++m)
      for (int64_t f = 0; f < a.shape[1]; ++f) CHECK(a.at(m, f) == b.at(m, f + 1));
  }
}

TEST_CASE("mel filterbank row sums are reproduced") {
  MelConfig cfg;
  const auto bank = mel_filterbank(cfg);
  std::vector<double> row_sums(80, 0.0);
  for (int m = 0; m < 80; ++m)
    for (double v : bank[static_cast<size_t>(m)]) row_sums[static_cast<size_t>(m)] += v;

  SUBCASE("impulse at a frame center has an exactly flat spectrum") {
    // |STFT| of a centered impulse is the window peak in every bin, so the
    // mel outputs are exactly the log row sums.
    std::vector<double> x(16000, 0.0);
    x[cfg.hop * 50] = 1.0;
    TensorD mel = mel_spectrogram(x, cfg);
    for (int m = 0; m < 80; ++m) {
      const double want = std::log(std::max(row_sums[static_cast<size_t>(m)], cfg.log_floor));
      CHECK(mel.at(m, 50) == doctest::Approx(want).epsilon(1e-9));
    }
  }

  SUBCASE("white noise reproduces row sums within 5%") {
    Rng rng(1234);
    std::vector<double> x(static_cast<size_t>(16000) * 6);
    for (auto& v : x) v = rng.gaussian();
    TensorD mel = mel_spectrogram(x, cfg);
    // E|X_k| for Gaussian noise through a Hann window, flat across bins.
    const std::vector<double> w = hann_window(cfg.window);
    double wsq = 0.0;
    for (double v : w) wsq += v * v;
    const double level = std::sqrt(M_PI * wsq) / 2.0;
    for (int m = 0; m < 80; ++m) {
      double mean = 0.0;
      for (int64_t f = 0; f < mel.shape[1]; ++f) mean += std::exp(mel.at(m, f));
      mean /= double(mel.shape[1]);
      CHECK(mean / (row_sums[static_cast<size_t>(m)] * level) ==
            doctest::Approx(1.0).epsilon(0.05));
    }
  }
}

TEST_CASE("fractional_resample") {
  SUBCASE("identity ratio returns the input") {
    TensorD x({2, 31});
    Rng rng(5);
    for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
    TensorD y = fractional_resample(x, Ratio(3, 3));
    CHECK(y.data == x.data);
  }

  SUBCASE("downsampling a ramp is exact") {
    TensorD x({1, 1000});
    for (int64_t n = 0; n < 1000; ++n) x.at(0, n) = double(n);
    TensorD y = fractional_resample(x, Ratio(2, 5));  // down by 2.5
    REQUIRE(y.shape[1] == 400);
    for (int64_t m = 0; m < 400; ++m) CHECK(y.at(0, m) == doctest::Approx(2.5 * m).epsilon(1e-12));
  }

  SUBCASE("upsampling a ramp is exact away from the start") {
    TensorD x({1, 100});
    for (int64_t n = 0; n < 100; ++n) x.at(0, n) = double(n);
    TensorD y = fractional_resample(x, Ratio(5, 2));  // up by 2.5
    REQUIRE(y.shape[1] == 250);
    for (int64_t m = 3; m < 250; ++m) CHECK(y.at(0, m) == doctest::Approx(0.4 * m).epsilon(1e-12));
  }

  SUBCASE("up by 2 then down by 2 round-trips exactly") {
    TensorD x({1, 256});
    Rng rng(17);
    for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
    TensorD up = fractional_resample(x, Ratio(2, 1));
    TensorD back = fractional_resample(up, Ratio(1, 2));
    REQUIRE(back.shape == x.shape);
    for (int64_t n = 0; n < 256; ++n)
      CHECK(std::abs(back.at(0, n) - x.at(0, n)) <= 1e-6);
  }

  SUBCASE("upsampling never reads future samples") {
    Rng rng(23);
    TensorD x({1, 200});
    for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
    TensorD trunc = x;
    const int64_t t = 100;
    for (int64_t n = t + 1; n < 200; ++n) trunc.at(0, n) = 0.0;
    TensorD a = fractional_resample(x, Ratio(5, 2));
    TensorD b = fractional_resample(trunc, Ratio(5, 2));
    for (int64_t m = 0; m < a.shape[1]; ++m) {
      if (m * 2 / 5 <= t) CHECK(a.at(0, m) == b.at(0, m));
    }
  }

  SUBCASE("invalid ratios are rejected") {
    CHECK_THROWS(Ratio(0, 1));
    CHECK_THROWS(Ratio(5, -2));
  }
}

TEST_CASE("fractional_resample streaming matches batch bit for bit") {
  Rng rng(777);
  for (const Ratio& ratio : {Ratio(1, 1), Ratio(1, 2), Ratio(2, 5), Ratio(2, 1), Ratio(5, 2)}) {
    TensorF x({3, 997});
    for (auto& v : x.data) v = float(rng.uniform(-1.0, 1.0));
    TensorF batch = fractional_resample(x, ratio);

    ResampleState<float> state;
    state.reset(3, ratio);
    std::vector<std::vector<float>> rows(3);
    int64_t pos = 0;
    while (pos < x.shape[1]) {
      const int64_t n = std::min<int64_t>(1 + static_cast<int64_t>(rng.below(37)),
                                          x.shape[1] - pos);
      TensorF chunk({3, n});
      for (int c = 0; c < 3; ++c)
        for (int64_t i = 0; i < n; ++i) chunk.at(c, i) = x.at(c, pos + i);
      TensorF y = fractional_resample_step(chunk, ratio, state);
      for (int c = 0; c < 3; ++c)
        for (int64_t i = 0; i < y.shape[1]; ++i) rows[static_cast<size_t>(c)].push_back(y.at(c, i));
      pos += n;
    }
    INFO("ratio=", ratio.str());
    REQUIRE(static_cast<int64_t>(rows[0].size()) == batch.shape[1]);
    for (int c = 0; c < 3; ++c)
      for (int64_t m = 0; m < batch.shape[1]; ++m)
        CHECK(rows[static_cast<size_t>(c)][static_cast<size_t>(m)] == batch.at(c, m));
  }
}
