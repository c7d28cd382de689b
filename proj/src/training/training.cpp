#include "postgan/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "postgan/wav.hpp"

namespace postgan::train {
namespace {

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

std::map<std::string, std::string> parse_kv(const std::string& text,
                                            const std::string& context) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(context + ": bad config line: " + line);
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

}  // namespace

std::string disc_config_text(const disc::DiscConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "base_channels=" << cfg.base_channels << "\n";
  os << "mid_channels=" << cfg.mid_channels << "\n";
  os << "window=" << cfg.window << "\n";
  os << "pqmf_taps=" << cfg.pqmf_taps << "\n";
  os << "pqmf_beta=" << cfg.pqmf_beta << "\n";
  return os.str();
}

disc::DiscConfig disc_config_from_text(const std::string& text) {
  disc::DiscConfig cfg;
  for (const auto& [key, value] : parse_kv(text, "DiscConfig")) {
    if (key == "base_channels") {
      cfg.base_channels = std::stoll(value);
    } else if (key == "mid_channels") {
      cfg.mid_channels = std::stoll(value);
    } else if (key == "window") {
      cfg.window = std::stoll(value);
    } else if (key == "pqmf_taps") {
      cfg.pqmf_taps = std::stoll(value);
    } else if (key == "pqmf_beta") {
      cfg.pqmf_beta = std::stod(value);
    } else {
      throw std::invalid_argument("DiscConfig: unknown config key: " + key);
    }
  }
  cfg.validate();
  return cfg;
}

namespace {

// Element-wise average of per-item loss reports; every report in the batch
// has the same resolution/member counts.
loss::LossReport mean_report(const std::vector<loss::LossReport>& reps) {
  loss::LossReport out = reps[0];
  for (size_t i = 1; i < reps.size(); ++i) {
    const loss::LossReport& r = reps[i];
    for (size_t j = 0; j < out.l_sc.size(); ++j) out.l_sc[j] += r.l_sc[j];
    for (size_t j = 0; j < out.l_mag.size(); ++j) out.l_mag[j] += r.l_mag[j];
    for (size_t j = 0; j < out.adv.size(); ++j) out.adv[j] += r.adv[j];
    out.l_aux += r.l_aux;
    out.adv_mean += r.adv_mean;
    out.total += r.total;
  }
  const double inv = 1.0 / static_cast<double>(reps.size());
  for (double& v : out.l_sc) v *= inv;
  for (double& v : out.l_mag) v *= inv;
  for (double& v : out.adv) v *= inv;
  out.l_aux *= inv;
  out.adv_mean *= inv;
  out.total *= inv;
  return out;
}

// Mean over members of each score map's mean.
double score_mean(const nn::Tape<float>& tape, const std::vector<nn::Var>& scores) {
  double acc = 0.0;
  for (const nn::Var s : scores) {
    const Tensor<float>& t = tape.val(s);
    double m = 0.0;
    for (const float x : t.data) m += x;
    acc += m / static_cast<double>(t.data.size());
  }
  return acc / static_cast<double>(scores.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// TrainConfig
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size < 1 || segment_length < 1 || checkpoint_every < 1)
    throw std::invalid_argument("TrainConfig: sizes must be positive");
  if (segment_length % 160 != 0)
    throw std::invalid_argument(
        "TrainConfig: segment_length must be a multiple of the 160-sample frame");
  if (pretrain_steps < 0 || adversarial_steps < 0)
    throw std::invalid_argument("TrainConfig: negative step counts");
  // Zero is a valid (frozen) learning rate; only sign errors are rejected.
  if (lr_g_initial < 0.0 || lr_g_late < 0.0 || lr_d < 0.0)
    throw std::invalid_argument("TrainConfig: learning rates must not be negative");
  if (lr_switch_epoch < 1)
    throw std::invalid_argument("TrainConfig: lr_switch_epoch must be >= 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw std::invalid_argument("TrainConfig: betas must lie in [0, 1)");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "batch_size=" << batch_size << "\n";
  os << "segment_length=" << segment_length << "\n";
  os << "pretrain_steps=" << pretrain_steps << "\n";
  os << "adversarial_steps=" << adversarial_steps << "\n";
  os << "lr_g_initial=" << lr_g_initial << "\n";
  os << "lr_g_late=" << lr_g_late << "\n";
  os << "lr_switch_epoch=" << lr_switch_epoch << "\n";
  os << "lr_d=" << lr_d << "\n";
  os << "beta1=" << beta1 << "\n";
  os << "beta2=" << beta2 << "\n";
  os << "seed=" << seed << "\n";
  os << "checkpoint_every=" << checkpoint_every << "\n";
  return os.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig cfg;
  for (const auto& [key, value] : parse_kv(text, "TrainConfig")) {
    if (key == "batch_size") {
      cfg.batch_size = std::stoll(value);
    } else if (key == "segment_length") {
      cfg.segment_length = std::stoll(value);
    } else if (key == "pretrain_steps") {
      cfg.pretrain_steps = std::stoll(value);
    } else if (key == "adversarial_steps") {
      cfg.adversarial_steps = std::stoll(value);
    } else if (key == "lr_g_initial") {
      cfg.lr_g_initial = std::stod(value);
    } else if (key == "lr_g_late") {
      cfg.lr_g_late = std::stod(value);
    } else if (key == "lr_switch_epoch") {
      cfg.lr_switch_epoch = std::stoll(value);
    } else if (key == "lr_d") {
      cfg.lr_d = std::stod(value);
    } else if (key == "beta1") {
      cfg.beta1 = std::stod(value);
    } else if (key == "beta2") {
      cfg.beta2 = std::stod(value);
    } else if (key == "seed") {
      cfg.seed = std::stoull(value);
    } else if (key == "checkpoint_every") {
      cfg.checkpoint_every = std::stoll(value);
    } else {
      throw std::invalid_argument("TrainConfig: unknown config key: " + key);
    }
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

PairedDataset load_dataset(const std::string& manifest_path, std::ostream& log) {
  std::ifstream in(manifest_path);
  if (!in)
    throw std::runtime_error("load_dataset: cannot open manifest: " + manifest_path);
  const std::filesystem::path root =
      std::filesystem::path(manifest_path).parent_path();

  PairedDataset data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("load_dataset: manifest line lacks a tab: " + line);

    PairedItem item;
    item.coded_path = line.substr(0, tab);
    item.ref_path = line.substr(tab + 1);
    const auto resolve = [&root](const std::string& p) {
      const std::filesystem::path fp(p);
      return fp.is_absolute() ? fp.string() : (root / fp).string();
    };

    const auto skip = [&](const std::string& reason) {
      log << "load_dataset: skipping " << item.coded_path << ": " << reason << "\n";
      ++data.skipped;
    };
    wav::WavData coded, ref;
    try {
      coded = wav::read_wav(resolve(item.coded_path));
      ref = wav::read_wav(resolve(item.ref_path));
    } catch (const std::exception& e) {
      skip(e.what());
      continue;
    }
    if (coded.sample_rate != 16000 || ref.sample_rate != 16000) {
      skip("sample rate " +
           std::to_string(coded.sample_rate != 16000 ? coded.sample_rate
                                                     : ref.sample_rate) +
           " != 16000");
      continue;
    }
    if (coded.channels != 1 || ref.channels != 1) {
      skip("channel count " +
           std::to_string(coded.channels != 1 ? coded.channels : ref.channels) +
           " != 1");
      continue;
    }
    const int64_t lc = coded.frames(), lr = ref.frames();
    if (std::abs(lc - lr) > 160) {
      skip("lengths differ by " + std::to_string(std::abs(lc - lr)) +
           " samples (> 160)");
      continue;
    }
    const size_t keep = static_cast<size_t>(std::min(lc, lr));
    item.coded = std::move(coded.samples);
    item.ref = std::move(ref.samples);
    item.coded.resize(keep);
    item.ref.resize(keep);
    data.items.push_back(std::move(item));
  }
  if (data.skipped > 0)
    log << "load_dataset: skipped " << data.skipped << " item(s)\n";
  if (data.items.empty())
    log << "load_dataset: warning: dataset is empty\n";
  return data;
}

Batch draw_batch(const PairedDataset& data, const TrainConfig& cfg,
                 const dsp::MelConfig& mel_cfg, Rng& rng) {
  std::vector<size_t> eligible;
  for (size_t i = 0; i < data.items.size(); ++i)
    if (data.items[i].length() >= cfg.segment_length) eligible.push_back(i);
  if (eligible.empty())
    throw std::runtime_error("draw_batch: no item is at least " +
                             std::to_string(cfg.segment_length) + " samples long");

  Batch batch;
  std::vector<float> segment(static_cast<size_t>(cfg.segment_length));
  for (int64_t b = 0; b < cfg.batch_size; ++b) {
    const PairedItem& item =
        data.items[eligible[rng.below(eligible.size())]];
    const int64_t max_frame = (item.length() - cfg.segment_length) / 160;
    const int64_t offset =
        160 * static_cast<int64_t>(rng.below(static_cast<uint64_t>(max_frame) + 1));

    Tensor<float> coded({1, cfg.segment_length});
    Tensor<float> ref({1, cfg.segment_length});
    for (int64_t t = 0; t < cfg.segment_length; ++t) {
      coded.data[static_cast<size_t>(t)] = item.coded[static_cast<size_t>(offset + t)];
      ref.data[static_cast<size_t>(t)] = item.ref[static_cast<size_t>(offset + t)];
    }
    std::copy(coded.data.begin(), coded.data.end(), segment.begin());
    batch.mel.push_back(dsp::mel_spectrogram(segment, mel_cfg));
    batch.coded.push_back(std::move(coded));
    batch.ref.push_back(std::move(ref));
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(const gen::GeneratorConfig& gcfg, const disc::DiscConfig& dcfg,
                 const TrainConfig& tcfg, PairedDataset data)
    : gcfg_(gcfg), dcfg_(dcfg), cfg_(tcfg), data_(std::move(data)), gen_(gcfg),
      ens_(dcfg) {
  cfg_.validate();
  opt_g_.beta1 = cfg_.beta1;
  opt_g_.beta2 = cfg_.beta2;
  opt_d_.beta1 = cfg_.beta1;
  opt_d_.beta2 = cfg_.beta2;
  const int64_t n = static_cast<int64_t>(data_.items.size());
  spe_ = n > 0 ? (n + cfg_.batch_size - 1) / cfg_.batch_size : 1;
}

void Trainer::init() {
  store_.tensors.clear();
  opt_g_.m.clear();
  opt_g_.v.clear();
  opt_g_.step_count = 0;
  opt_d_.m.clear();
  opt_d_.v.clear();
  opt_d_.step_count = 0;
  step_ = 0;
  // One stream seeds initialization and then keeps driving batch, noise, and
  // window draws, so (seed, manifest, config) pins the whole run.
  Rng rng(cfg_.seed);
  gen_.init(store_, rng);
  ens_.init(store_, rng);
  rng_ = rng;
}

double Trainer::lr_g() const {
  const int64_t epoch = step_ / spe_ + 1;  // epoch of the upcoming step, 1-based
  return epoch < cfg_.lr_switch_epoch ? cfg_.lr_g_initial : cfg_.lr_g_late;
}

std::map<std::string, Tensor<float>> Trainer::batch_mean(
    std::vector<std::map<std::string, Tensor<float>>>& per_item,
    const std::string& keep_prefix) const {
  std::map<std::string, Tensor<float>> out;
  for (auto& grads : per_item) {
    for (auto& [name, g] : grads) {
      if (!starts_with(name, keep_prefix)) continue;
      const auto it = out.find(name);
      if (it == out.end()) {
        out.emplace(name, std::move(g));
      } else {
        for (size_t i = 0; i < it->second.data.size(); ++i)
          it->second.data[i] += g.data[i];
      }
    }
  }
  const float inv = 1.0f / static_cast<float>(per_item.size());
  for (auto& [name, g] : out)
    for (float& x : g.data) x *= inv;
  return out;
}

loss::LossReport Trainer::pretrain_step() {
  const Batch batch = draw_batch(data_, cfg_, gcfg_.mel(), rng_);
  const size_t n = batch.coded.size();
  std::vector<std::map<std::string, Tensor<float>>> grads(n);
  std::vector<loss::LossReport> reports(n);
  for (size_t i = 0; i < n; ++i) {
    nn::Tape<float> tape;
    const nn::Var audio = tape.leaf(batch.coded[i]);
    const nn::Var mel = tape.leaf(batch.mel[i]);
    const nn::Var xhat = gen_.forward(tape, store_, audio, mel, rng_.next_u64());
    const nn::Var ref = tape.leaf(batch.ref[i]);
    const nn::Var l_aux = loss::multires_stft_loss(tape, xhat, ref, &reports[i]);
    const double value = tape.val(l_aux).data[0];
    if (!std::isfinite(value))
      throw std::runtime_error("pretrain_step: non-finite loss at step " +
                               std::to_string(step_ + 1));
    reports[i].total = reports[i].l_aux;
    tape.backward(l_aux);
    grads[i] = tape.param_grads();
  }
  opt_g_.step(store_, batch_mean(grads, "g."), lr_g());
  ++step_;
  return mean_report(reports);
}

AdvStepReport Trainer::adversarial_step() {
  const Batch batch = draw_batch(data_, cfg_, gcfg_.mel(), rng_);
  const size_t n = batch.coded.size();

  // Discriminator update: hinge on real vs the current generator's output,
  // taken as a detached value so no gradient reaches the generator. Real and
  // fake are scored on the same randomly drawn windows.
  std::vector<std::map<std::string, Tensor<float>>> d_grads(n);
  double d_loss_sum = 0.0, real_sum = 0.0, fake_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    Tensor<float> fake_value;
    {
      nn::Tape<float> gtape;
      const nn::Var audio = gtape.leaf(batch.coded[i]);
      const nn::Var mel = gtape.leaf(batch.mel[i]);
      const nn::Var xhat = gen_.forward(gtape, store_, audio, mel, rng_.next_u64());
      fake_value = gtape.val(xhat);
    }
    const std::vector<disc::WindowSlice> windows =
        ens_.draw_windows(cfg_.segment_length, rng_);
    nn::Tape<float> tape;
    const nn::Var real = tape.leaf(batch.ref[i]);
    const nn::Var fake = tape.leaf(std::move(fake_value));
    const std::vector<nn::Var> real_scores = ens_.forward(tape, store_, real, windows);
    const std::vector<nn::Var> fake_scores = ens_.forward(tape, store_, fake, windows);
    const nn::Var d_loss = loss::hinge_d_loss(tape, real_scores, fake_scores);
    const double value = tape.val(d_loss).data[0];
    if (!std::isfinite(value))
      throw std::runtime_error(
          "adversarial_step: non-finite discriminator loss at step " +
          std::to_string(step_ + 1));
    d_loss_sum += value;
    real_sum += score_mean(tape, real_scores);
    fake_sum += score_mean(tape, fake_scores);
    tape.backward(d_loss);
    d_grads[i] = tape.param_grads();
  }
  opt_d_.step(store_, batch_mean(d_grads, "d"), cfg_.lr_d);

  // Generator update against the refreshed discriminator, on fresh noise and
  // fresh windows.
  std::vector<std::map<std::string, Tensor<float>>> g_grads(n);
  std::vector<loss::LossReport> reports(n);
  for (size_t i = 0; i < n; ++i) {
    nn::Tape<float> tape;
    const nn::Var audio = tape.leaf(batch.coded[i]);
    const nn::Var mel = tape.leaf(batch.mel[i]);
    const nn::Var xhat = gen_.forward(tape, store_, audio, mel, rng_.next_u64());
    const std::vector<disc::WindowSlice> windows =
        ens_.draw_windows(cfg_.segment_length, rng_);
    const std::vector<nn::Var> fake_scores = ens_.forward(tape, store_, xhat, windows);
    const nn::Var ref = tape.leaf(batch.ref[i]);
    const nn::Var objective =
        loss::generator_objective(tape, xhat, ref, fake_scores, &reports[i]);
    const double value = tape.val(objective).data[0];
    if (!std::isfinite(value))
      throw std::runtime_error(
          "adversarial_step: non-finite generator objective at step " +
          std::to_string(step_ + 1));
    tape.backward(objective);
    g_grads[i] = tape.param_grads();
  }
  opt_g_.step(store_, batch_mean(g_grads, "g."), lr_g());
  ++step_;

  AdvStepReport out;
  out.gen = mean_report(reports);
  out.d_loss = d_loss_sum / static_cast<double>(n);
  out.real_mean = real_sum / static_cast<double>(n);
  out.fake_mean = fake_sum / static_cast<double>(n);
  return out;
}

void Trainer::set_schedule(int64_t pretrain_steps, int64_t adversarial_steps,
                           int64_t checkpoint_every) {
  TrainConfig updated = cfg_;
  updated.pretrain_steps = pretrain_steps;
  updated.adversarial_steps = adversarial_steps;
  updated.checkpoint_every = checkpoint_every;
  updated.validate();
  cfg_ = updated;
}

void Trainer::run(std::ostream& log, const std::string& outdir) {
  std::filesystem::create_directories(outdir);
  const std::string checkpoint = outdir + "/checkpoint.pgan";
  const int64_t total = cfg_.pretrain_steps + cfg_.adversarial_steps;
  while (step_ < total) {
    if (pretraining()) {
      const loss::LossReport rep = pretrain_step();
      log << "pretrain " << rep.line(step_) << '\n';
    } else {
      const AdvStepReport rep = adversarial_step();
      char tail[96];
      std::snprintf(tail, sizeof(tail), " d_loss %.6f d_real %.6f d_fake %.6f",
                    rep.d_loss, rep.real_mean, rep.fake_mean);
      log << "adv " << rep.gen.line(step_) << tail << '\n';
    }
    log.flush();
    if (step_ % cfg_.checkpoint_every == 0 && step_ < total) save(checkpoint);
  }
  save(checkpoint);
}

void Trainer::save(const std::string& path) const {
  nn::WeightStore<float> full = store_;
  const auto add_moments = [&full](const nn::Adam<float>& opt,
                                   const std::string& prefix) {
    for (const auto& [name, t] : opt.m) full.add(prefix + ".m." + name, t);
    for (const auto& [name, t] : opt.v) full.add(prefix + ".v." + name, t);
  };
  add_moments(opt_g_, "opt_g");
  add_moments(opt_d_, "opt_d");

  std::ostringstream state;
  state << "step=" << step_ << "\n";
  state << "adam_g_steps=" << opt_g_.step_count << "\n";
  state << "adam_d_steps=" << opt_d_.step_count << "\n";
  state << "steps_per_epoch=" << spe_ << "\n";
  uint64_t s[4];
  rng_.state(s);
  state << "rng=" << s[0] << ' ' << s[1] << ' ' << s[2] << ' ' << s[3] << "\n";

  const std::string metadata = inference_metadata(gcfg_) + "[discriminator]\n" +
                               disc_config_text(dcfg_) + "[train]\n" + cfg_.to_text() +
                               "[state]\n" + state.str();
  // Write-then-rename keeps the previous checkpoint intact if this one dies
  // mid-write.
  const std::string tmp = path + ".tmp";
  nn::save_checkpoint(tmp, full, metadata);
  std::filesystem::rename(tmp, path);
}

Trainer Trainer::load(const std::string& path, PairedDataset data) {
  std::string metadata;
  nn::WeightStore<float> full = nn::load_checkpoint(path, &metadata);
  const auto sections = metadata_sections(metadata);
  const auto need = [&sections, &path](const std::string& name) -> const std::string& {
    const auto it = sections.find(name);
    if (it == sections.end())
      throw std::runtime_error("Trainer::load: checkpoint lacks [" + name +
                               "] metadata: " + path);
    return it->second;
  };

  Trainer t(gen::GeneratorConfig::from_text(need("generator")),
            disc_config_from_text(need("discriminator")),
            TrainConfig::from_text(need("train")), std::move(data));
  for (auto& [name, tensor] : full.tensors) {
    if (starts_with(name, "opt_g.m.")) {
      t.opt_g_.m.emplace(name.substr(8), std::move(tensor));
    } else if (starts_with(name, "opt_g.v.")) {
      t.opt_g_.v.emplace(name.substr(8), std::move(tensor));
    } else if (starts_with(name, "opt_d.m.")) {
      t.opt_d_.m.emplace(name.substr(8), std::move(tensor));
    } else if (starts_with(name, "opt_d.v.")) {
      t.opt_d_.v.emplace(name.substr(8), std::move(tensor));
    } else {
      t.store_.add(name, std::move(tensor));
    }
  }

  const auto state = parse_kv(need("state"), "Trainer::load");
  t.step_ = std::stoll(state.at("step"));
  t.opt_g_.step_count = std::stoll(state.at("adam_g_steps"));
  t.opt_d_.step_count = std::stoll(state.at("adam_d_steps"));
  t.spe_ = std::stoll(state.at("steps_per_epoch"));
  uint64_t s[4];
  std::istringstream rng_is(state.at("rng"));
  for (uint64_t& w : s)
    if (!(rng_is >> w))
      throw std::runtime_error("Trainer::load: malformed rng state: " + path);
  t.rng_.set_state(s);
  return t;
}

// ---------------------------------------------------------------------------
// Checkpoint metadata helpers
// ---------------------------------------------------------------------------

std::map<std::string, std::string> metadata_sections(const std::string& metadata) {
  std::map<std::string, std::string> out;
  std::istringstream is(metadata);
  std::string line, current;
  while (std::getline(is, line)) {
    if (line.size() >= 2 && line.front() == '[' && line.back() == ']') {
      current = line.substr(1, line.size() - 2);
      out[current];
    } else if (!current.empty()) {
      out[current] += line + "\n";
    }
  }
  return out;
}

std::string inference_metadata(const gen::GeneratorConfig& cfg) {
  return "[generator]\n" + cfg.to_text();
}

}  // namespace postgan::train
