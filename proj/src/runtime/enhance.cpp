#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "postgan/dsp.hpp"
#include "postgan/generator.hpp"
#include "postgan/nncore.hpp"
#include "postgan/runtime.hpp"
#include "postgan/training.hpp"

namespace postgan::runtime {

InferenceModel load_inference_model(const std::string& checkpoint_path) {
  std::string metadata;
  nn::WeightStore<float> store = nn::load_checkpoint(checkpoint_path, &metadata);
  const auto sections = train::metadata_sections(metadata);
  const auto it = sections.find("generator");
  if (it == sections.end()) {
    throw std::runtime_error("checkpoint lacks [generator] metadata: " +
                             checkpoint_path);
  }
  InferenceModel model;
  model.config = gen::GeneratorConfig::from_text(it->second);
  model.store = std::move(store);
  return model;
}

void save_inference_checkpoint(const std::string& path,
                               const gen::GeneratorConfig& cfg,
                               const nn::WeightStore<float>& store) {
  nn::save_checkpoint(path, store, train::inference_metadata(cfg));
}

std::vector<float> enhance_batch(const gen::Generator<float>& g,
                                 const nn::WeightStore<float>& store,
                                 const std::vector<float>& audio,
                                 uint64_t noise_seed) {
  const int64_t n = static_cast<int64_t>(audio.size());
  if (n == 0) return {};
  const int64_t hop = 160;
  const int64_t padded_len = (n + hop - 1) / hop * hop;

  std::vector<float> padded(audio);
  padded.resize(static_cast<size_t>(padded_len), 0.0f);

  Tensor<float> mel = dsp::mel_spectrogram(padded, g.config().mel());

  nn::Tape<float> tape;
  const nn::Var in = tape.leaf(Tensor<float>({1, padded_len}, std::move(padded)));
  const nn::Var mel_id = tape.leaf(std::move(mel));
  const nn::Var out = g.forward(tape, store, in, mel_id, noise_seed);

  const Tensor<float>& y = tape.val(out);
  return std::vector<float>(y.data.begin(), y.data.begin() + n);
}

}  // namespace postgan::runtime
