#pragma once

#include <cstdint>
#include <string>

namespace postgan::runtime {

// Parameters of the bundled synthetic corpus. Each item pairs a clean
// reference with a degraded "coded" copy so the repository is self-testing
// without any external codec: the reference is band-limited noise (white
// noise pushed through a 4-band PQMF with the top two bands zeroed) and the
// coded side adds coarse amplitude quantization, round(x * 32) / 32.
struct CorpusSpec {
  int items = 8;
  int64_t base_length = 24000;   // item i has base_length + length_step * i samples
  int64_t length_step = 320;
  uint64_t seed = 7;
};

// Writes item_NN_coded.wav / item_NN_ref.wav pairs plus manifest.tsv into
// outdir (created if missing). Coded files are PCM16, references float32, so
// both supported WAV encodings flow through the training path. Manifest lines
// are "coded<TAB>ref" with paths relative to the manifest's directory.
// Returns the manifest path.
std::string make_corpus(const std::string& outdir, const CorpusSpec& spec = {});

}  // namespace postgan::runtime
