#include "postgan/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "postgan/common.hpp"
#include "postgan/dsp.hpp"
#include "postgan/wav.hpp"

namespace postgan::runtime {

std::string make_corpus(const std::string& outdir, const CorpusSpec& spec) {
  if (spec.items <= 0 || spec.base_length <= 0 || spec.length_step < 0)
    throw std::invalid_argument("make_corpus: spec fields must be positive");
  std::filesystem::create_directories(outdir);

  const dsp::PqmfBank bank = dsp::design_pqmf(4, 62, 9.0, 0.142);
  Rng rng(spec.seed);

  std::ofstream manifest(outdir + "/manifest.tsv");
  if (!manifest) throw std::runtime_error("make_corpus: cannot create manifest in " + outdir);

  for (int item = 0; item < spec.items; ++item) {
    const int64_t length = spec.base_length + spec.length_step * item;
    std::vector<float> noise(static_cast<size_t>(length));
    for (float& s : noise) s = static_cast<float>(rng.uniform(-1.0, 1.0));

    // Keep only the lowest PQMF band (0-2 kHz, telephone-band-like): analyze,
    // drop bands 1-3, resynthesize, then trim the group delay so content
    // starts immediately.
    dsp::SubbandSignal<float> sub = dsp::pqmf_analysis(noise, bank);
    for (int band = 1; band < 4; ++band)
      std::fill(sub.bands.row(band), sub.bands.row(band) + sub.bands.length(), 0.0f);
    std::vector<float> ref = dsp::pqmf_synthesis(sub, bank);
    ref.erase(ref.begin(), ref.begin() + bank.delay());
    ref.resize(static_cast<size_t>(length));

    float peak = 0.0f;
    for (const float s : ref) peak = std::max(peak, std::abs(s));
    const float scale = peak > 0.0f ? 0.5f / peak : 0.0f;
    for (float& s : ref) s *= scale;

    wav::WavData ref_wav;
    ref_wav.format = wav::SampleFormat::kFloat32;
    ref_wav.samples = ref;

    // 5-bit-style amplitude grid; every level is a multiple of 1/32 and hence
    // exactly representable in PCM16, so the file round-trips the distortion.
    wav::WavData coded_wav;
    coded_wav.format = wav::SampleFormat::kPcm16;
    coded_wav.samples.resize(ref.size());
    for (size_t i = 0; i < ref.size(); ++i)
      coded_wav.samples[i] =
          static_cast<float>(std::lround(ref[i] * 32.0f)) / 32.0f;

    char coded_name[32], ref_name[32];
    std::snprintf(coded_name, sizeof(coded_name), "item_%02d_coded.wav", item);
    std::snprintf(ref_name, sizeof(ref_name), "item_%02d_ref.wav", item);
    wav::write_wav(outdir + "/" + coded_name, coded_wav);
    wav::write_wav(outdir + "/" + ref_name, ref_wav);
    manifest << coded_name << '\t' << ref_name << '\n';
  }
  manifest.close();
  if (!manifest) throw std::runtime_error("make_corpus: manifest write failed");
  return outdir + "/manifest.tsv";
}

}  // namespace postgan::runtime
