#include <stdexcept>

#include "postgan/generator.hpp"

namespace postgan::gen {

template <class S>
Generator<S>::Generator(GeneratorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  bank_ = dsp::design_pqmf(cfg_.num_bands, cfg_.pqmf_taps, cfg_.pqmf_beta,
                           cfg_.pqmf_cutoff);
  const auto in_ch = cfg_.enc_in_channels();
  const auto& out_ch = cfg_.enc_channels;
  const auto factors = cfg_.num_blocks > 0 ? cfg_.cond_factors() : std::vector<int64_t>{};
  const int64_t k = cfg_.inner_kernel;

  pre_ = {"g.pre", cfg_.num_bands, cfg_.pre_channels, cfg_.pre_kernel, 1, 1, 1};
  post_ = {"g.post", cfg_.pre_channels, cfg_.num_bands, cfg_.post_kernel, 1, 1, 1};

  for (int i = 0; i < cfg_.num_blocks; ++i) {
    const std::string ep = "g.enc" + std::to_string(i + 1) + ".";
    EncBlock b;
    b.cond = {"g.cond" + std::to_string(i + 1) + ".conv", cfg_.mel_bins, in_ch[i],
              k, 1, 1, 1};
    b.ga = {ep + "ga", in_ch[i], in_ch[i], k, 1, 1, 1};
    b.gb = {ep + "gb", in_ch[i], in_ch[i], k, 1, 1, 1};
    b.fuse = {ep + "fuse", in_ch[i] + in_ch[i], out_ch[i], k, 1, 1, 1};
    b.gamma = {ep + "gamma", out_ch[i], out_ch[i], k, 1, 1, 1};
    b.beta = {ep + "beta", out_ch[i], out_ch[i], k, 1, 1, 1};
    b.down1 = {ep + "down1", in_ch[i], out_ch[i], k, 1, 1, 1};
    b.down2 = {ep + "down2", out_ch[i], out_ch[i], k, 1, 1, 1};
    b.scale = cfg_.scales[static_cast<size_t>(i)];
    b.cond_factor = factors[static_cast<size_t>(i)];
    enc_.push_back(std::move(b));
  }

  // Decoder block d mirrors encoder block e = N-1-d: it consumes that
  // encoder's modulation tensors and undoes its downsampling factor.
  for (int d = 0; d < cfg_.num_blocks; ++d) {
    const int e = cfg_.num_blocks - 1 - d;
    const std::string dp = "g.dec" + std::to_string(d + 1) + ".";
    DecBlock b;
    for (int t = 0; t < cfg_.tade_units; ++t) {
      const std::string up = dp + "u" + std::to_string(t + 1) + ".";
      nn::Conv1d<S> ca{up + "ca", out_ch[e], out_ch[e], k, 1, 1, 1};
      nn::Conv1d<S> cb{up + "cb", out_ch[e], out_ch[e], k, 1, 1, 1};
      b.units.emplace_back(std::move(ca), std::move(cb));
    }
    b.up1 = {dp + "up1", out_ch[e], in_ch[e], k, 1, 1, 1};
    b.up2 = {dp + "up2", in_ch[e], in_ch[e], k, 1, 1, 1};
    b.scale = cfg_.scales[static_cast<size_t>(e)];
    dec_.push_back(std::move(b));
  }
}

template <class S>
void Generator<S>::init(nn::WeightStore<S>& store, Rng& rng) const {
  pre_.init(store, rng);
  for (const EncBlock& b : enc_) {
    b.cond.init(store, rng);
    b.ga.init(store, rng);
    b.gb.init(store, rng);
    b.fuse.init(store, rng);
    b.gamma.init(store, rng);
    b.beta.init(store, rng);
    b.down1.init(store, rng);
    b.down2.init(store, rng);
  }
  for (const DecBlock& b : dec_) {
    for (const auto& [ca, cb] : b.units) {
      ca.init(store, rng);
      cb.init(store, rng);
    }
    b.up1.init(store, rng);
    b.up2.init(store, rng);
  }
  post_.init(store, rng);
}

template <class S>
nn::Var Generator<S>::condnet_forward(nn::Tape<S>& tape,
                                      const nn::WeightStore<S>& store, nn::Var mel,
                                      int block) const {
  if (block < 1 || block > cfg_.num_blocks)
    throw std::invalid_argument("condnet_forward: block index out of range");
  const EncBlock& b = enc_[static_cast<size_t>(block - 1)];
  if (tape.val(mel).channels() != cfg_.mel_bins)
    throw std::invalid_argument("condnet_forward: mel band count mismatch");
  const nn::Var up = tape.resample(mel, Ratio(b.cond_factor, 1));
  return tape.leaky_relu(b.cond.forward(tape, store, up), S(0.2));
}

template <class S>
std::pair<nn::Var, ModulationParams> Generator<S>::encoder_block_forward(
    nn::Tape<S>& tape, const nn::WeightStore<S>& store, nn::Var x_in,
    nn::Var cond_latent, int block) const {
  if (block < 1 || block > cfg_.num_blocks)
    throw std::invalid_argument("encoder_block_forward: block index out of range");
  const EncBlock& b = enc_[static_cast<size_t>(block - 1)];
  if (tape.val(x_in).length() != tape.val(cond_latent).length())
    throw std::invalid_argument("encoder_block_forward: misaligned lengths");

  const nn::Var g = tape.gated(b.ga.forward(tape, store, x_in),
                               b.gb.forward(tape, store, x_in));

  const nn::Var cat = tape.concat_channels({x_in, cond_latent});
  const nn::Var fused = tape.leaky_relu(b.fuse.forward(tape, store, cat), S(0.2));
  ModulationParams mods;
  mods.gamma = b.gamma.forward(tape, store, fused);
  mods.beta = b.beta.forward(tape, store, fused);

  nn::Var h = tape.leaky_relu(b.down1.forward(tape, store, g), S(0.2));
  h = tape.resample(h, b.scale.inverse());
  h = tape.leaky_relu(b.down2.forward(tape, store, h), S(0.2));
  return {h, mods};
}

template <class S>
nn::Var Generator<S>::decoder_block_forward(nn::Tape<S>& tape,
                                            const nn::WeightStore<S>& store,
                                            nn::Var x_in, const ModulationParams& mods,
                                            int block) const {
  if (block < 1 || block > cfg_.num_blocks)
    throw std::invalid_argument("decoder_block_forward: block index out of range");
  const DecBlock& b = dec_[static_cast<size_t>(block - 1)];
  if (!tape.val(mods.gamma).same_shape(tape.val(x_in)) ||
      !tape.val(mods.beta).same_shape(tape.val(x_in)))
    throw std::invalid_argument("decoder_block_forward: modulation shape mismatch");

  nn::Var h = x_in;
  for (const auto& [ca, cb] : b.units) {
    const nn::Var u = tape.add(tape.mul(mods.gamma, tape.channel_norm(h)), mods.beta);
    const nn::Var gate = tape.gated(ca.forward(tape, store, u),
                                    cb.forward(tape, store, u));
    h = tape.add(h, gate);
  }
  h = tape.leaky_relu(b.up1.forward(tape, store, h), S(0.2));
  h = tape.resample(h, b.scale);
  return tape.leaky_relu(b.up2.forward(tape, store, h), S(0.2));
}

template <class S>
nn::Var Generator<S>::forward(nn::Tape<S>& tape, const nn::WeightStore<S>& store,
                              nn::Var audio, nn::Var mel, uint64_t noise_seed) const {
  const Tensor<S>& a = tape.val(audio);
  if (a.channels() != 1 || a.length() <= 0 ||
      a.length() % cfg_.frame_samples() != 0)
    throw std::invalid_argument(
        "generator_forward: audio must be (1, L) with L a multiple of 160");
  const int64_t frames = a.length() / cfg_.frame_samples();
  if (tape.val(mel).channels() != cfg_.mel_bins || tape.val(mel).length() != frames)
    throw std::invalid_argument("generator_forward: mel/audio span mismatch");

  nn::Var h = tape.pqmf_analyze(audio, bank_);
  h = pre_.forward(tape, store, h);

  std::vector<ModulationParams> mods;
  for (int i = 1; i <= cfg_.num_blocks; ++i) {
    const nn::Var cond = condnet_forward(tape, store, mel, i);
    auto [down, m] = encoder_block_forward(tape, store, h, cond, i);
    h = down;
    mods.push_back(m);
  }

  // Bottleneck noise: t-major draw order so the streaming path can draw the
  // same sequence one frame at a time.
  {
    const std::vector<int64_t> bottle_shape = tape.val(h).shape;
    Rng rng(noise_seed);
    Tensor<S> noise(bottle_shape);
    for (int64_t t = 0; t < noise.length(); ++t)
      for (int64_t c = 0; c < noise.channels(); ++c)
        noise.at(c, t) = static_cast<S>(rng.gaussian());
    h = tape.add(h, tape.leaf(std::move(noise)));
  }

  for (int d = 1; d <= cfg_.num_blocks; ++d) {
    const int e = cfg_.num_blocks - d;  // 0-based paired encoder block
    const Ratio down = enc_[static_cast<size_t>(e)].scale.inverse();
    ModulationParams m;
    m.gamma = tape.resample(mods[static_cast<size_t>(e)].gamma, down);
    m.beta = tape.resample(mods[static_cast<size_t>(e)].beta, down);
    h = decoder_block_forward(tape, store, h, m, d);
  }

  h = tape.tanh_op(post_.forward(tape, store, h));
  return tape.pqmf_synthesize(h, bank_);
}

template class Generator<float>;
template class Generator<double>;

}  // namespace postgan::gen
