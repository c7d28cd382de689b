#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "postgan/common.hpp"
#include "postgan/discriminator.hpp"
#include "postgan/generator.hpp"
#include "postgan/losses.hpp"
#include "postgan/nncore.hpp"
#include "postgan/tensor.hpp"

namespace postgan::train {

// Two-stage schedule and optimizer settings. The generator learning rate is
// epoch-scheduled: 1e-4 strictly before lr_switch_epoch and lr_g_late from
// then on, where an epoch is ceil(items / batch_size) steps (pretraining steps
// included in the count).
struct TrainConfig {
  int64_t batch_size = 32;
  int64_t segment_length = 16000;  // 1 s at 16 kHz, must be a multiple of 160
  int64_t pretrain_steps = 105000;
  int64_t adversarial_steps = 645000;
  double lr_g_initial = 1e-4;
  double lr_g_late = 5e-5;
  int64_t lr_switch_epoch = 150;  // 1-based
  double lr_d = 5e-5;
  double beta1 = 0.5;
  double beta2 = 0.9;
  uint64_t seed = 1;
  int64_t checkpoint_every = 1000;

  void validate() const;
  // Canonical key=value text, embedded in checkpoint metadata.
  std::string to_text() const;
  static TrainConfig from_text(const std::string& text);
  bool operator==(const TrainConfig&) const = default;
};

// DiscConfig uses the same key=value text convention as the other configs so
// it can live in checkpoint metadata and config files.
std::string disc_config_text(const disc::DiscConfig& cfg);
disc::DiscConfig disc_config_from_text(const std::string& text);

// One coded/reference pair, fully loaded and trimmed to a common length.
struct PairedItem {
  std::string coded_path;
  std::string ref_path;
  std::vector<float> coded;
  std::vector<float> ref;
  int64_t length() const { return static_cast<int64_t>(coded.size()); }
};

struct PairedDataset {
  std::vector<PairedItem> items;
  int64_t skipped = 0;  // manifest entries dropped during loading
};

// Manifest: one "coded<TAB>reference" line per pair; relative paths resolve
// against the manifest's directory. Items are validated (16 kHz, mono) and
// pairs are trimmed to the shorter length when within 160 samples; anything
// else is skipped with a note on `log`. A missing manifest throws.
PairedDataset load_dataset(const std::string& manifest_path, std::ostream& log);

struct Batch {
  std::vector<Tensor<float>> coded;  // (1, segment_length) each
  std::vector<Tensor<float>> ref;    // (1, segment_length), same offsets
  std::vector<Tensor<float>> mel;    // from the coded segment
};

// batch_size draws of (random item, random 160-aligned offset). Throws when no
// item is at least segment_length long.
Batch draw_batch(const PairedDataset& data, const TrainConfig& cfg,
                 const dsp::MelConfig& mel_cfg, Rng& rng);

struct AdvStepReport {
  loss::LossReport gen;     // generator-update objective breakdown
  double d_loss = 0.0;      // batch-mean hinge loss of the discriminator update
  double real_mean = 0.0;   // batch-mean discriminator scores before its update
  double fake_mean = 0.0;
};

// Owns the generator, the discriminator ensemble, one shared WeightStore, both
// optimizers, and the rng stream that drives batch selection, noise seeds, and
// discriminator window draws. All state round-trips through save()/load(), so
// a resumed run continues bit-exactly.
class Trainer {
 public:
  Trainer(const gen::GeneratorConfig& gcfg, const disc::DiscConfig& dcfg,
          const TrainConfig& tcfg, PairedDataset data);

  // Fresh parameters and a fresh rng stream from cfg.seed.
  void init();

  const TrainConfig& config() const { return cfg_; }
  const gen::Generator<float>& generator() const { return gen_; }
  const disc::DiscriminatorEnsemble<float>& ensemble() const { return ens_; }
  const nn::WeightStore<float>& store() const { return store_; }
  nn::WeightStore<float>& store() { return store_; }
  const nn::Adam<float>& adam_g() const { return opt_g_; }
  const nn::Adam<float>& adam_d() const { return opt_d_; }
  const PairedDataset& dataset() const { return data_; }

  int64_t step() const { return step_; }  // completed steps, both phases
  int64_t steps_per_epoch() const { return spe_; }
  // Learning rate the next generator update will use.
  double lr_g() const;
  bool pretraining() const { return step_ < cfg_.pretrain_steps; }

  // One batch: forward, multi-resolution STFT loss, generator Adam update.
  // Non-finite losses throw; nothing is updated in that case.
  loss::LossReport pretrain_step();
  // One batch: discriminator hinge update on real vs detached generator
  // output (shared windows), then a generator update against the refreshed
  // discriminator (fresh windows).
  AdvStepReport adversarial_step();

  // Extends or shortens the remaining schedule, e.g. to continue a finished
  // checkpoint for more steps. Other config fields stay fixed for the life of
  // the run.
  void set_schedule(int64_t pretrain_steps, int64_t adversarial_steps,
                    int64_t checkpoint_every);

  // Executes the remaining steps of both phases, writing one log line per
  // step and checkpointing into outdir every cfg.checkpoint_every steps.
  void run(std::ostream& log, const std::string& outdir);

  // Weights, optimizer moments, step counters, and rng state in one file.
  void save(const std::string& path) const;
  static Trainer load(const std::string& path, PairedDataset data);

 private:
  std::map<std::string, Tensor<float>> batch_mean(
      std::vector<std::map<std::string, Tensor<float>>>& per_item,
      const std::string& keep_prefix) const;

  gen::GeneratorConfig gcfg_;
  disc::DiscConfig dcfg_;
  TrainConfig cfg_;
  PairedDataset data_;
  gen::Generator<float> gen_;
  disc::DiscriminatorEnsemble<float> ens_;
  nn::WeightStore<float> store_;
  nn::Adam<float> opt_g_, opt_d_;
  Rng rng_;
  int64_t step_ = 0;
  int64_t spe_ = 1;
};

// Splits checkpoint metadata of the form "[name]\nbody..." into name -> body.
// The generator section is what inference tools need; the rest is trainer
// state.
std::map<std::string, std::string> metadata_sections(const std::string& metadata);

// Assembles metadata for an inference-only checkpoint (generator section
// only); Trainer::save extends the same layout with its extra sections.
std::string inference_metadata(const gen::GeneratorConfig& cfg);

}  // namespace postgan::train
