// Command-line entry point: enhance, stream, train, report, verify, corpus.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "postgan/corpus.hpp"
#include "postgan/discriminator.hpp"
#include "postgan/generator.hpp"
#include "postgan/runtime.hpp"
#include "postgan/training.hpp"
#include "postgan/wav.hpp"

namespace fs = std::filesystem;
using namespace postgan;

namespace {

struct ResolvedConfigs {
  gen::GeneratorConfig g;
  disc::DiscConfig d;
  train::TrainConfig t;
};

// --config accepts a preset name or a path to a sectioned config file
// ([generator] / [discriminator] / [train], same layout as checkpoint
// metadata); missing sections fall back to desk-preset defaults.
ResolvedConfigs resolve_config(const std::string& value) {
  ResolvedConfigs out;
  out.g = gen::GeneratorConfig::desk();
  if (value == "desk") return out;
  if (value == "full") {
    out.g = gen::GeneratorConfig::full();
    return out;
  }
  if (value == "tiny") {
    out.g = gen::GeneratorConfig::tiny();
    out.d = disc::DiscConfig::tiny();
    return out;
  }
  std::ifstream f(value);
  if (!f) throw std::runtime_error("cannot open config: " + value);
  std::stringstream ss;
  ss << f.rdbuf();
  const auto sections = train::metadata_sections(ss.str());
  if (const auto it = sections.find("generator"); it != sections.end())
    out.g = gen::GeneratorConfig::from_text(it->second);
  if (const auto it = sections.find("discriminator"); it != sections.end())
    out.d = train::disc_config_from_text(it->second);
  if (const auto it = sections.find("train"); it != sections.end())
    out.t = train::TrainConfig::from_text(it->second);
  return out;
}

int16_t to_s16(float v) {
  long q = std::lround(double(v) * 32768.0);
  if (q > 32767) q = 32767;
  if (q < -32768) q = -32768;
  return static_cast<int16_t>(q);
}

int run_enhance(const std::string& in_path, const std::string& out_path,
                const std::string& checkpoint, uint64_t seed) {
  const runtime::InferenceModel model = runtime::load_inference_model(checkpoint);
  const wav::WavData in = wav::read_wav(in_path);
  if (in.channels != 1)
    throw std::runtime_error("enhance: input must be mono (got " +
                             std::to_string(in.channels) + " channels)");
  if (in.sample_rate != model.config.sample_rate)
    throw std::runtime_error(
        "enhance: input must be " + std::to_string(model.config.sample_rate) +
        " Hz (got " + std::to_string(in.sample_rate) + ")");

  gen::Generator<float> g(model.config);
  wav::WavData out = in;
  out.samples = runtime::enhance_batch(g, model.store, in.samples, seed);
  wav::write_wav(out_path, out);
  return 0;
}

int run_stream(const std::string& checkpoint, uint64_t seed) {
  const runtime::InferenceModel model = runtime::load_inference_model(checkpoint);
  gen::Generator<float> g(model.config);
  gen::GeneratorStream<float> stream(g, model.store, seed);

  const int64_t frame = model.config.frame_samples();
  std::vector<int16_t> pcm(static_cast<size_t>(frame));
  std::vector<float> buf(static_cast<size_t>(frame));
  int64_t frames_in = 0;
  bool priming = true;
  double processing = 0.0;

  const auto emit = [&](const std::vector<float>& out) {
    for (size_t i = 0; i < out.size(); ++i) pcm[i] = to_s16(out[i]);
    if (std::fwrite(pcm.data(), sizeof(int16_t), out.size(), stdout) != out.size())
      throw std::runtime_error("stream: write failed");
  };

  while (true) {
    const size_t got = std::fread(pcm.data(), sizeof(int16_t),
                                  static_cast<size_t>(frame), stdin);
    if (got < static_cast<size_t>(frame)) {
      if (got > 0)
        std::fprintf(stderr, "stream: discarding partial trailing frame (%zu samples)\n",
                     got);
      break;
    }
    for (int64_t i = 0; i < frame; ++i) buf[i] = float(pcm[i]) / 32768.0f;
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<float> out = stream.step(buf.data(), frame);
    processing += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();
    ++frames_in;
    // The first returned frame is priming silence (one frame of buffering);
    // a final zero-input flush below re-aligns the output with batch mode.
    if (priming) {
      priming = false;
    } else {
      emit(out);
    }
  }
  if (frames_in > 0) {
    std::fill(buf.begin(), buf.end(), 0.0f);
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<float> out = stream.step(buf.data(), frame);
    processing += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();
    emit(out);
  }
  std::fflush(stdout);

  const double audio_s = double(frames_in) * double(frame) / model.config.sample_rate;
  const double rtf = audio_s > 0.0 ? processing / audio_s : 0.0;
  std::fprintf(stderr, "real_time_factor %.4f (processing %.3f s, audio %.3f s)\n",
               rtf, processing, audio_s);
  return 0;
}

int run_report(const std::string& checkpoint, const std::string& config) {
  gen::GeneratorConfig cfg;
  if (!checkpoint.empty()) {
    cfg = runtime::load_inference_model(checkpoint).config;
  } else {
    cfg = resolve_config(config).g;
  }
  const gen::CostReport r = gen::report_cost(cfg);
  std::printf("parameters %lld\n", static_cast<long long>(r.params));
  std::printf("complexity %.6f GMACs per second (%.0f MACs)\n",
              r.macs_per_second / 1e9, r.macs_per_second);
  std::printf(
      "delay frame_buffer %.5f ms + mel_lookahead %.5f ms + pqmf_analysis %.5f ms"
      " + pqmf_synthesis %.5f ms = %.5f ms\n",
      r.delay.frame_buffer_ms, r.delay.mel_lookahead_ms, r.delay.pqmf_analysis_ms,
      r.delay.pqmf_synthesis_ms, r.delay.total_ms());
  std::printf(
      "reference operating point: 2.6 M parameters, 5.1 GMACs per second,"
      " 22.5 ms delay\n");
  return 0;
}

int run_train(const std::string& manifest, const std::string& config,
              const std::string& outdir, const std::string& resume,
              const CLI::App* cmd, uint64_t seed, int64_t steps_pre,
              int64_t steps_adv, int64_t batch_size, int64_t ckpt_every) {
  if (!fs::exists(manifest)) {
    std::cerr << "train: manifest not found: " << manifest << "\n";
    return 2;
  }
  train::PairedDataset ds = train::load_dataset(manifest, std::cerr);
  fs::create_directories(outdir);
  std::ofstream log(outdir + "/train.log", std::ios::app);
  if (!log) throw std::runtime_error("train: cannot open log in " + outdir);

  const auto passed = [cmd](const std::string& name) {
    return cmd->count(name) > 0;
  };

  if (!resume.empty()) {
    train::Trainer tr = train::Trainer::load(resume, std::move(ds));
    if (passed("--seed"))
      std::cerr << "train: --seed ignored on resume (rng state comes from the"
                   " checkpoint)\n";
    if (passed("--batch-size"))
      std::cerr << "train: --batch-size ignored on resume\n";
    tr.set_schedule(
        passed("--steps-pretrain") ? steps_pre : tr.config().pretrain_steps,
        passed("--steps-adv") ? steps_adv : tr.config().adversarial_steps,
        passed("--checkpoint-every") ? ckpt_every : tr.config().checkpoint_every);
    tr.run(log, outdir);
    std::cout << "training complete at step " << tr.step() << "; checkpoint "
              << outdir << "/checkpoint.pgan\n";
    return 0;
  }

  ResolvedConfigs rc = resolve_config(config);
  if (passed("--seed")) rc.t.seed = seed;
  if (passed("--steps-pretrain")) rc.t.pretrain_steps = steps_pre;
  if (passed("--steps-adv")) rc.t.adversarial_steps = steps_adv;
  if (passed("--batch-size")) rc.t.batch_size = batch_size;
  if (passed("--checkpoint-every")) rc.t.checkpoint_every = ckpt_every;

  train::Trainer tr(rc.g, rc.d, rc.t, std::move(ds));
  tr.init();
  tr.run(log, outdir);
  std::cout << "training complete at step " << tr.step() << "; checkpoint "
            << outdir << "/checkpoint.pgan\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"postgan: coded-speech post-processor"};
  app.require_subcommand(1);

  std::string in_path, out_path, checkpoint, config = "desk", manifest, outdir;
  uint64_t seed = 0;
  int64_t steps_pre = 0, steps_adv = 0, batch_size = 0, ckpt_every = 0;
  int items = 8;

  CLI::App* enhance = app.add_subcommand(
      "enhance", "process a WAV file through a checkpointed generator");
  enhance->add_option("input", in_path, "input WAV (mono 16 kHz)")->required();
  enhance->add_option("output", out_path, "output WAV path")->required();
  enhance->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  enhance->add_option("--seed", seed, "noise seed (default 0)");

  CLI::App* stream = app.add_subcommand(
      "stream", "frame-by-frame processing of raw s16le audio on stdin/stdout");
  stream->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  stream->add_option("--seed", seed, "noise seed (default 0)");

  CLI::App* train_cmd = app.add_subcommand(
      "train", "two-stage training on a coded/reference manifest");
  train_cmd->add_option("--manifest", manifest, "TSV manifest of coded/ref pairs")
      ->required();
  train_cmd->add_option("--outdir", outdir, "checkpoint + log directory")
      ->required();
  train_cmd->add_option("--config", config,
                        "preset (tiny|desk|full) or config file path");
  train_cmd->add_option("--checkpoint", checkpoint, "resume from checkpoint");
  train_cmd->add_option("--seed", seed, "training seed");
  train_cmd->add_option("--steps-pretrain", steps_pre, "pretraining steps");
  train_cmd->add_option("--steps-adv", steps_adv, "adversarial steps");
  train_cmd->add_option("--batch-size", batch_size, "segments per update");
  train_cmd->add_option("--checkpoint-every", ckpt_every,
                        "checkpoint interval in steps");

  CLI::App* report = app.add_subcommand(
      "report", "parameter count, complexity, and delay budget");
  report->add_option("--checkpoint", checkpoint, "read config from checkpoint");
  report->add_option("--config", config,
                     "preset (tiny|desk|full) or config file path");

  CLI::App* verify =
      app.add_subcommand("verify", "fixed-seed invariant suite");

  CLI::App* corpus = app.add_subcommand(
      "corpus", "write the bundled synthetic training corpus");
  corpus->add_option("--outdir", outdir, "corpus directory")->required();
  corpus->add_option("--items", items, "number of coded/ref pairs");
  corpus->add_option("--seed", seed, "corpus seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*enhance) return run_enhance(in_path, out_path, checkpoint, seed);
    if (*stream) return run_stream(checkpoint, seed);
    if (*train_cmd)
      return run_train(manifest, config, outdir, checkpoint, train_cmd, seed,
                       steps_pre, steps_adv, batch_size, ckpt_every);
    if (*report) return run_report(checkpoint, config);
    if (*verify) return runtime::run_verify(std::cout) == 0 ? 0 : 1;
    if (*corpus) {
      runtime::CorpusSpec spec;
      spec.items = items;
      if (corpus->count("--seed")) spec.seed = seed;
      const std::string manifest_path = runtime::make_corpus(outdir, spec);
      std::cout << "corpus manifest: " << manifest_path << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "postgan: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
