#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "postgan/dsp.hpp"
#include "postgan/generator.hpp"
#include "postgan/losses.hpp"
#include "postgan/nncore.hpp"
#include "postgan/runtime.hpp"
#include "postgan/wav.hpp"

namespace postgan::runtime {
namespace {

struct CheckLog {
  std::ostream& out;
  int failures = 0;

  void report(const std::string& name, bool pass, const std::string& tolerance,
              const std::string& measured) {
    out << (pass ? "[ok]   " : "[FAIL] ") << name;
    for (size_t i = name.size(); i < 28; ++i) out << ' ';
    out << " tolerance " << tolerance << "  measured " << measured << "\n";
    if (!pass) ++failures;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double reconstruction_snr(const dsp::PqmfBank& bank, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(4096);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  auto sub = dsp::pqmf_analysis(x, bank);
  auto y = dsp::pqmf_synthesis(sub, bank);
  const int d = bank.delay();
  double sig = 0.0, err = 0.0;
  for (size_t t = 0; t + d < y.size() && t < x.size(); ++t) {
    sig += x[t] * x[t];
    const double e = y[t + d] - x[t];
    err += e * e;
  }
  return 10.0 * std::log10(sig / std::max(err, 1e-300));
}

void check_pqmf(CheckLog& log) {
  const auto bank = dsp::design_pqmf(4, 62, 9.0, 0.142);
  double worst = 1e9;
  for (uint64_t seed = 1; seed <= 10; ++seed)
    worst = std::min(worst, reconstruction_snr(bank, seed));
  log.report("pqmf_reconstruction", worst >= 50.0, ">= 50 dB",
             fmt("%.2f dB (worst of 10 seeds)", worst));

  // Impulse through analysis+synthesis peaks at the group delay.
  std::vector<double> imp(512, 0.0);
  imp[0] = 1.0;
  auto y = dsp::pqmf_synthesis(dsp::pqmf_analysis(imp, bank), bank);
  const int64_t peak = std::max_element(y.begin(), y.end(),
                                        [](double a, double b) {
                                          return std::abs(a) < std::abs(b);
                                        }) -
                       y.begin();
  log.report("pqmf_group_delay", peak == 61, "== 61 samples",
             fmt("%.0f samples", static_cast<double>(peak)));

  // Deliberate fault: cutoff 0.4 is far off the optimized ratio and must
  // wreck reconstruction. The check passes when the fault is detected.
  const auto bad = dsp::design_pqmf(4, 62, 9.0, 0.4);
  const double bad_snr = reconstruction_snr(bad, 1);
  log.report("pqmf_fault_cutoff_0.4", bad_snr < 50.0,
             "< 50 dB expected from corrupted bank",
             fmt("%.2f dB (fault detected)", bad_snr));
}

void check_mel_framing(CheckLog& log) {
  dsp::MelConfig cfg;
  bool ok = true;
  int64_t bad_len = -1;
  for (int64_t len : {1, 159, 160, 161, 1600, 16000}) {
    std::vector<float> x(static_cast<size_t>(len), 0.25f);
    const auto m = dsp::mel_spectrogram(x, cfg);
    const int64_t want = (len + cfg.hop - 1) / cfg.hop;
    if (m.dim(0) != cfg.num_mels || m.dim(1) != want) {
      ok = false;
      bad_len = len;
    }
  }
  log.report("mel_framing", ok, "frames == ceil(len/160)",
             ok ? "exact for len in {1,159,160,161,1600,16000}"
                : "mismatch at len " + std::to_string(bad_len));
}

void check_stream_equivalence(CheckLog& log) {
  const auto cfg = gen::GeneratorConfig::desk();
  gen::Generator<float> g(cfg);
  nn::WeightStore<float> store;
  Rng rng(42);
  g.init(store, rng);

  const int64_t frames = 20, hop = 160, len = frames * hop;
  std::vector<float> audio(static_cast<size_t>(len));
  for (auto& v : audio) v = static_cast<float>(rng.uniform(-0.5, 0.5));

  const std::vector<float> batch = enhance_batch(g, store, audio, 7);

  gen::GeneratorStream<float> stream(g, store, 7);
  std::vector<float> streamed;
  for (int64_t f = 0; f < frames; ++f) {
    auto out = stream.step(audio.data() + f * hop, hop);
    if (f > 0) streamed.insert(streamed.end(), out.begin(), out.end());
  }
  std::vector<float> flush(hop, 0.0f);
  auto tail = stream.step(flush.data(), hop);
  streamed.insert(streamed.end(), tail.begin(), tail.end());

  double worst = 0.0;
  for (int64_t t = 0; t < len; ++t)
    worst = std::max(worst, std::abs(double(streamed[t]) - double(batch[t])));
  log.report("stream_equivalence", worst <= 1e-5, "<= 1e-5 max abs",
             fmt("%.3g max abs (desk, 20 frames)", worst));
}

void check_causality(CheckLog& log) {
  const auto cfg = gen::GeneratorConfig::tiny();
  gen::Generator<float> g(cfg);
  nn::WeightStore<float> store;
  Rng rng(5);
  g.init(store, rng);
  // Randomized biases keep pre-activations off the leaky-relu kink so the
  // comparison exercises genuinely nonlinear paths.
  for (auto& [name, t] : store.tensors)
    if (name.size() > 2 && name.substr(name.size() - 2) == ".b")
      for (auto& v : t.data) v = static_cast<float>(rng.uniform(-0.3, 0.3));

  const int64_t frames = 8, hop = 160, len = frames * hop, edit_frame = 5;
  std::vector<float> a(static_cast<size_t>(len));
  for (auto& v : a) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  std::vector<float> b = a;
  for (int64_t t = edit_frame * hop; t < len; ++t)
    b[t] = static_cast<float>(rng.uniform(-0.5, 0.5));

  // Editing input frame j may reach output frame j-1 through the mel window
  // (one frame of lookahead, the 10 ms the delay budget charges); everything
  // strictly before frame j-1 must be bit-identical.
  const auto ya = enhance_batch(g, store, a, 3);
  const auto yb = enhance_batch(g, store, b, 3);
  double before = 0.0, after = 0.0;
  for (int64_t t = 0; t < (edit_frame - 1) * hop; ++t)
    before = std::max(before, std::abs(double(ya[t]) - double(yb[t])));
  for (int64_t t = (edit_frame - 1) * hop; t < len; ++t)
    after = std::max(after, std::abs(double(ya[t]) - double(yb[t])));
  log.report("causality", before == 0.0 && after > 0.0,
             "== 0 before the lookahead horizon",
             fmt("%.3g max abs over first 4 frames", before));
}

void check_gradients(CheckLog& log) {
  double worst = 0.0;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed * 131);
    nn::WeightStore<double> store;
    nn::Conv1d<double> conv{"c", 2, 4, 3};
    conv.init(store, rng);
    for (auto& [name, t] : store.tensors)
      for (auto& v : t.data) v = rng.uniform(-0.2, 0.2);

    Tensor<double> x({2, 12});
    for (auto& v : x.data) v = rng.uniform(-0.8, 0.8);

    nn::Tape<double> tape;
    const nn::Var in = tape.leaf(x, true);
    const nn::Var h = conv.forward(tape, store, in);
    const nn::Var n = tape.channel_norm(h);
    const nn::Var l = tape.mean(tape.mul(n, n));
    tape.backward(l);
    const Tensor<double>& gx = tape.grad(in);

    for (size_t i = 0; i < x.data.size(); i += 5) {
      const double eps = 1e-6;
      const double keep = x.data[i];
      auto eval = [&](double v) {
        x.data[i] = v;
        nn::Tape<double> t2;
        const nn::Var i2 = t2.leaf(x);
        const nn::Var h2 = conv.forward(t2, store, i2);
        const nn::Var n2 = t2.channel_norm(h2);
        const nn::Var l2 = t2.mean(t2.mul(n2, n2));
        return t2.val(l2).data[0];
      };
      const double fd = (eval(keep + eps) - eval(keep - eps)) / (2 * eps);
      x.data[i] = keep;
      const double an = gx.data[i];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  log.report("gradient_spot_check", worst <= 1e-4, "rel err <= 1e-4",
             fmt("%.3g worst (conv+channel_norm, 3 seeds)", worst));
}

void check_determinism(CheckLog& log) {
  const auto cfg = gen::GeneratorConfig::tiny();
  gen::Generator<float> g(cfg);
  nn::WeightStore<float> store;
  Rng rng(17);
  g.init(store, rng);
  std::vector<float> audio(960);
  for (auto& v : audio) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  const auto a = enhance_batch(g, store, audio, 11);
  const auto b = enhance_batch(g, store, audio, 11);
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(double(a[i]) - double(b[i])));
  log.report("determinism", worst == 0.0, "== 0 (same seed twice)",
             fmt("%.3g max abs", worst));
}

void check_wav_round_trip(CheckLog& log) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path();
  Rng rng(23);
  bool ok = true;
  for (const auto format : {wav::SampleFormat::kPcm16, wav::SampleFormat::kFloat32}) {
    wav::WavData w;
    w.format = format;
    w.samples.resize(777);
    for (auto& v : w.samples) {
      v = static_cast<float>(rng.uniform(-1.0, 1.0));
      if (format == wav::SampleFormat::kPcm16)
        v = static_cast<float>(std::lround(v * 32767.0) / 32768.0);
    }
    const std::string path =
        (dir / (format == wav::SampleFormat::kPcm16 ? "postgan_verify_i16.wav"
                                                    : "postgan_verify_f32.wav"))
            .string();
    wav::write_wav(path, w);
    const auto r = wav::read_wav(path);
    ok = ok && r.samples.size() == w.samples.size() && r.format == w.format;
    for (size_t i = 0; ok && i < r.samples.size(); ++i)
      ok = r.samples[i] == w.samples[i];
    fs::remove(path);
  }
  log.report("wav_round_trip", ok, "bit-exact both formats",
             ok ? "exact" : "mismatch");
}

void check_checkpoint_round_trip(CheckLog& log) {
  namespace fs = std::filesystem;
  const std::string path =
      (fs::temp_directory_path() / "postgan_verify_ck.pgan").string();
  const auto cfg = gen::GeneratorConfig::tiny();
  gen::Generator<float> g(cfg);
  nn::WeightStore<float> store;
  Rng rng(31);
  g.init(store, rng);
  save_inference_checkpoint(path, cfg, store);
  const auto model = load_inference_model(path);
  fs::remove(path);
  bool ok = model.config == cfg &&
            model.store.tensors.size() == store.tensors.size();
  for (const auto& [name, t] : store.tensors) {
    if (!ok) break;
    ok = model.store.has(name) && model.store.at(name).data == t.data;
  }
  log.report("checkpoint_round_trip", ok, "bit-exact store + config",
             ok ? "exact" : "mismatch");
}

}  // namespace

int run_verify(std::ostream& out) {
  CheckLog log{out};
  check_pqmf(log);
  check_mel_framing(log);
  check_stream_equivalence(log);
  check_causality(log);
  check_gradients(log);
  check_determinism(log);
  check_wav_round_trip(log);
  check_checkpoint_round_trip(log);
  const int total = 10;
  out << "verify: " << (total - log.failures) << "/" << total
      << " checks passed\n";
  return log.failures;
}

}  // namespace postgan::runtime
