#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "postgan/generator.hpp"
#include "postgan/nncore.hpp"

namespace postgan::runtime {

// Generator configuration plus weights pulled from a checkpoint's [generator]
// metadata section. Checkpoints written by the trainer carry discriminator
// weights and optimizer moments as well; inference ignores those tensors.
struct InferenceModel {
  gen::GeneratorConfig config;
  nn::WeightStore<float> store;
};

InferenceModel load_inference_model(const std::string& checkpoint_path);

// Inference-only checkpoint: generator weights and config, nothing else.
void save_inference_checkpoint(const std::string& path,
                               const gen::GeneratorConfig& cfg,
                               const nn::WeightStore<float>& store);

// Whole-file forward pass: zero-pads the tail to a 160-multiple, conditions
// on the padded input's own mel spectrogram, and trims the output back to the
// input length. Empty input stays empty.
std::vector<float> enhance_batch(const gen::Generator<float>& g,
                                 const nn::WeightStore<float>& store,
                                 const std::vector<float>& audio,
                                 uint64_t noise_seed);

// Fixed-seed invariant suite: PQMF reconstruction and group delay, a
// deliberate fault injection (cutoff 0.4), mel framing, streaming equivalence,
// causality, gradient spot checks, determinism, WAV and checkpoint round
// trips. Prints one line per check with its tolerance and measured value.
// Returns the number of failed checks.
int run_verify(std::ostream& out);

}  // namespace postgan::runtime
