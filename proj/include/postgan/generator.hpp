#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "postgan/common.hpp"
#include "postgan/dsp.hpp"
#include "postgan/nncore.hpp"
#include "postgan/tensor.hpp"

namespace postgan::gen {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

// Architecture hyperparameters. The default/desk/full presets all share the
// factor structure: encoder scales multiply to hop/num_bands so the bottleneck
// runs at the mel frame rate (100 Hz), and CondNet upsampling factors are the
// remaining per-block alignment ratios ([40, 40, 20, 10, 5, 2] here).
struct GeneratorConfig {
  int sample_rate = 16000;
  int num_bands = 4;
  int pqmf_taps = 62;
  double pqmf_beta = 9.0;
  double pqmf_cutoff = 0.142;
  int mel_bins = 80;
  int num_blocks = 6;
  int64_t pre_channels = 16;            // output width of the pre conv
  std::vector<int64_t> enc_channels;    // encoder block output widths
  std::vector<Ratio> scales;            // encoder downsampling per block
  int tade_units = 1;                   // TADE residual units per decoder block
  int64_t noise_dim = 96;               // must equal bottleneck width
  int pre_kernel = 7;
  int post_kernel = 7;
  int inner_kernel = 3;

  static GeneratorConfig desk();
  static GeneratorConfig full();
  static GeneratorConfig tiny();  // small widths for gradient checking

  // Throws std::invalid_argument when the factor consistency rules are broken.
  void validate() const;

  dsp::MelConfig mel() const;
  int64_t frame_samples() const { return dsp::MelConfig{}.hop; }  // 160
  std::vector<int64_t> enc_in_channels() const;
  int64_t bottleneck_channels() const;
  // Mel upsampling factor per block; exact integers by the factor invariant.
  std::vector<int64_t> cond_factors() const;

  // Canonical text form (fixed key order, one key=value per line); used in
  // checkpoint metadata so a checkpoint fully describes its network.
  std::string to_text() const;
  static GeneratorConfig from_text(const std::string& text);

  bool operator==(const GeneratorConfig&) const = default;
};

// Per-block TADE modulation tensors at a shared time resolution.
struct ModulationParams {
  nn::Var gamma = -1;
  nn::Var beta = -1;
};

// Cost breakdown; MACs are multiply-accumulates per second of audio.
struct DelayBudget {
  double frame_buffer_ms = 0.0;    // block-based processing granularity
  double mel_lookahead_ms = 0.0;   // mel analysis window beyond the current frame
  double pqmf_analysis_ms = 0.0;   // analysis filter group delay
  double pqmf_synthesis_ms = 0.0;  // synthesis filter group delay
  double total_ms() const {
    return frame_buffer_ms + mel_lookahead_ms + pqmf_analysis_ms + pqmf_synthesis_ms;
  }
};

struct CostReport {
  int64_t params = 0;
  double macs_per_second = 0.0;
  DelayBudget delay;
};

CostReport report_cost(const GeneratorConfig& cfg);

// ---------------------------------------------------------------------------
// Generator network
// ---------------------------------------------------------------------------

template <class S>
class Generator {
 public:
  struct EncBlock {
    nn::Conv1d<S> cond, ga, gb, fuse, gamma, beta, down1, down2;
    Ratio scale{1, 1};
    int64_t cond_factor = 1;
  };
  struct DecBlock {
    std::vector<std::pair<nn::Conv1d<S>, nn::Conv1d<S>>> units;  // (ca, cb)
    nn::Conv1d<S> up1, up2;
    Ratio scale{1, 1};  // mirrored encoder scale (upsampling)
  };

  explicit Generator(GeneratorConfig cfg);

  const GeneratorConfig& config() const { return cfg_; }
  const dsp::PqmfBank& bank() const { return bank_; }
  const nn::Conv1d<S>& pre() const { return pre_; }
  const nn::Conv1d<S>& post() const { return post_; }
  const std::vector<EncBlock>& enc_blocks() const { return enc_; }
  const std::vector<DecBlock>& dec_blocks() const { return dec_; }

  // Fresh parameters for every layer (v ~ N(0, 0.02), g = ||v||, bias 0).
  void init(nn::WeightStore<S>& store, Rng& rng) const;

  // block is 1-based to match the block numbering in the architecture figure.
  nn::Var condnet_forward(nn::Tape<S>& tape, const nn::WeightStore<S>& store,
                          nn::Var mel, int block) const;
  std::pair<nn::Var, ModulationParams> encoder_block_forward(
      nn::Tape<S>& tape, const nn::WeightStore<S>& store, nn::Var x_in,
      nn::Var cond_latent, int block) const;
  nn::Var decoder_block_forward(nn::Tape<S>& tape, const nn::WeightStore<S>& store,
                                nn::Var x_in, const ModulationParams& mods,
                                int block) const;

  // audio (1, L) with L a multiple of 160; mel (mel_bins, L/160).
  nn::Var forward(nn::Tape<S>& tape, const nn::WeightStore<S>& store, nn::Var audio,
                  nn::Var mel, uint64_t noise_seed) const;

 private:
  GeneratorConfig cfg_;
  dsp::PqmfBank bank_;
  nn::Conv1d<S> pre_, post_;
  std::vector<EncBlock> enc_;
  std::vector<DecBlock> dec_;
};

// ---------------------------------------------------------------------------
// Streaming runtime
// ---------------------------------------------------------------------------

// One active stream over frozen weights. Feeding frames of 160 samples yields
// 160 output samples each; frame k's return value is the batch output frame
// k-1 (one frame of buffering covers the mel lookahead), so the first call
// returns silence and a final zero-frame flush drains the last frame.
template <class S>
class GeneratorStream {
 public:
  GeneratorStream(const Generator<S>& gen, const nn::WeightStore<S>& store,
                  uint64_t noise_seed);

  void reset();  // identical to a freshly constructed stream
  std::vector<S> step(const S* frame, int64_t n);

 private:
  std::vector<S> frame_pass(const std::vector<S>& sig_frame,
                            const std::vector<S>& mel_col);

  struct EncCtx {
    dsp::ResampleState<S> cond_rs;
    nn::ConvStream<S> cond_cs, ga, gb, fuse, gamma, beta, down1, down2;
    dsp::ResampleState<S> down_rs;
  };
  struct DecCtx {
    dsp::ResampleState<S> gamma_rs, beta_rs;
    std::vector<std::pair<nn::ConvStream<S>, nn::ConvStream<S>>> units;
    nn::ConvStream<S> up1, up2;
    dsp::ResampleState<S> up_rs;
  };

  const Generator<S>& gen_;
  uint64_t seed_;
  dsp::PqmfAnalysisState<S> ana_;
  dsp::PqmfSynthesisState<S> syn_;
  nn::ConvStream<S> pre_cs_, post_cs_;
  std::vector<EncCtx> enc_;
  std::vector<DecCtx> dec_;
  std::vector<std::vector<double>> mel_bank_;
  std::vector<S> mel_ring_;  // last `window` raw samples (zeros = left pad)
  std::vector<S> prev_;      // buffered previous input frame
  bool have_prev_ = false;
  Rng noise_rng_;
};

}  // namespace postgan::gen
