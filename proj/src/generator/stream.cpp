#include <cmath>
#include <stdexcept>

#include "postgan/generator.hpp"

namespace postgan::gen {
namespace {

// Elementwise pieces mirror the tape ops exactly (same expressions, same
// scalar type) so streaming output can match batch output bit for bit.
template <class S>
void leaky_inplace(Tensor<S>& t, S slope) {
  for (auto& v : t.data) v = v > S(0) ? v : slope * v;
}

template <class S>
void tanh_inplace(Tensor<S>& t) {
  for (auto& v : t.data) v = static_cast<S>(std::tanh(double(v)));
}

template <class S>
Tensor<S> concat_rows(const Tensor<S>& a, const Tensor<S>& b) {
  Tensor<S> out({a.channels() + b.channels(), a.length()});
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
  return out;
}

}  // namespace

template <class S>
GeneratorStream<S>::GeneratorStream(const Generator<S>& gen,
                                    const nn::WeightStore<S>& store,
                                    uint64_t noise_seed)
    : gen_(gen), seed_(noise_seed) {
  pre_cs_.bind(gen.pre(), store);
  post_cs_.bind(gen.post(), store);
  for (const auto& b : gen.enc_blocks()) {
    EncCtx c;
    c.cond_cs.bind(b.cond, store);
    c.ga.bind(b.ga, store);
    c.gb.bind(b.gb, store);
    c.fuse.bind(b.fuse, store);
    c.gamma.bind(b.gamma, store);
    c.beta.bind(b.beta, store);
    c.down1.bind(b.down1, store);
    c.down2.bind(b.down2, store);
    enc_.push_back(std::move(c));
  }
  for (const auto& b : gen.dec_blocks()) {
    DecCtx c;
    for (const auto& [ca, cb] : b.units) {
      nn::ConvStream<S> sa, sb;
      sa.bind(ca, store);
      sb.bind(cb, store);
      c.units.emplace_back(std::move(sa), std::move(sb));
    }
    c.up1.bind(b.up1, store);
    c.up2.bind(b.up2, store);
    dec_.push_back(std::move(c));
  }
  mel_bank_ = dsp::mel_filterbank(gen.config().mel());
  reset();
}

template <class S>
void GeneratorStream<S>::reset() {
  const GeneratorConfig& cfg = gen_.config();
  const auto in_ch = cfg.enc_in_channels();
  const auto& out_ch = cfg.enc_channels;

  ana_.reset(gen_.bank());
  syn_.reset(gen_.bank());
  pre_cs_.reset();
  post_cs_.reset();
  for (size_t i = 0; i < enc_.size(); ++i) {
    EncCtx& c = enc_[i];
    const auto& b = gen_.enc_blocks()[i];
    c.cond_rs.reset(cfg.mel_bins, Ratio(b.cond_factor, 1));
    c.cond_cs.reset();
    c.ga.reset();
    c.gb.reset();
    c.fuse.reset();
    c.gamma.reset();
    c.beta.reset();
    c.down1.reset();
    c.down_rs.reset(out_ch[i], b.scale.inverse());
    c.down2.reset();
  }
  for (size_t d = 0; d < dec_.size(); ++d) {
    DecCtx& c = dec_[d];
    const size_t e = dec_.size() - 1 - d;
    c.gamma_rs.reset(out_ch[e], gen_.dec_blocks()[d].scale.inverse());
    c.beta_rs.reset(out_ch[e], gen_.dec_blocks()[d].scale.inverse());
    for (auto& [ca, cb] : c.units) {
      ca.reset();
      cb.reset();
    }
    c.up1.reset();
    c.up_rs.reset(in_ch[e], gen_.dec_blocks()[d].scale);
    c.up2.reset();
  }
  mel_ring_.assign(static_cast<size_t>(cfg.mel().window), S(0));
  prev_.assign(static_cast<size_t>(cfg.frame_samples()), S(0));
  have_prev_ = false;
  noise_rng_.reseed(seed_);
}

template <class S>
std::vector<S> GeneratorStream<S>::step(const S* frame, int64_t n) {
  const int64_t hop = gen_.config().frame_samples();
  if (n != hop)
    throw std::invalid_argument("GeneratorStream::step: frame must be 160 samples");

  // Slide the mel ring so it holds exactly the analysis window of the
  // previous frame's mel column: [k*hop - (window-hop), (k+1)*hop).
  mel_ring_.erase(mel_ring_.begin(), mel_ring_.begin() + hop);
  mel_ring_.insert(mel_ring_.end(), frame, frame + hop);

  if (!have_prev_) {
    prev_.assign(frame, frame + hop);
    have_prev_ = true;
    return std::vector<S>(static_cast<size_t>(hop), S(0));
  }

  std::vector<S> mel_col(static_cast<size_t>(gen_.config().mel_bins));
  dsp::mel_frame(mel_ring_.data(), gen_.config().mel(), mel_bank_, mel_col.data());
  std::vector<S> out = frame_pass(prev_, mel_col);
  prev_.assign(frame, frame + hop);
  return out;
}

template <class S>
std::vector<S> GeneratorStream<S>::frame_pass(const std::vector<S>& sig_frame,
                                              const std::vector<S>& mel_col) {
  const GeneratorConfig& cfg = gen_.config();
  const int N = cfg.num_blocks;

  Tensor<S> h = dsp::pqmf_analysis_step(sig_frame.data(),
                                        static_cast<int64_t>(sig_frame.size()),
                                        gen_.bank(), ana_);
  h = pre_cs_.step(h);

  Tensor<S> mel({cfg.mel_bins, 1});
  std::copy(mel_col.begin(), mel_col.end(), mel.data.begin());

  std::vector<std::pair<Tensor<S>, Tensor<S>>> mods;
  for (int i = 0; i < N; ++i) {
    EncCtx& c = enc_[static_cast<size_t>(i)];
    const auto& b = gen_.enc_blocks()[static_cast<size_t>(i)];

    Tensor<S> cond =
        dsp::fractional_resample_step(mel, Ratio(b.cond_factor, 1), c.cond_rs);
    cond = c.cond_cs.step(cond);
    leaky_inplace(cond, S(0.2));

    const Tensor<S> a = c.ga.step(h);
    const Tensor<S> g2 = c.gb.step(h);
    Tensor<S> ta, sb, gate;
    nn::gated_core(a, g2, ta, sb, gate);

    Tensor<S> fused = c.fuse.step(concat_rows(h, cond));
    leaky_inplace(fused, S(0.2));
    mods.emplace_back(c.gamma.step(fused), c.beta.step(fused));

    Tensor<S> d1 = c.down1.step(gate);
    leaky_inplace(d1, S(0.2));
    Tensor<S> ds = dsp::fractional_resample_step(d1, b.scale.inverse(), c.down_rs);
    h = c.down2.step(ds);
    leaky_inplace(h, S(0.2));
  }

  // Bottleneck noise, drawn t-major like the batch path.
  for (int64_t t = 0; t < h.length(); ++t)
    for (int64_t ch = 0; ch < h.channels(); ++ch)
      h.at(ch, t) += static_cast<S>(noise_rng_.gaussian());

  for (int d = 0; d < N; ++d) {
    DecCtx& c = dec_[static_cast<size_t>(d)];
    const auto& b = gen_.dec_blocks()[static_cast<size_t>(d)];
    const size_t e = static_cast<size_t>(N - 1 - d);

    Tensor<S> gm =
        dsp::fractional_resample_step(mods[e].first, b.scale.inverse(), c.gamma_rs);
    Tensor<S> bt =
        dsp::fractional_resample_step(mods[e].second, b.scale.inverse(), c.beta_rs);

    for (auto& [ca, cb] : c.units) {
      Tensor<S> cn;
      nn::channel_norm_core(h, cn, static_cast<std::vector<S>*>(nullptr));
      Tensor<S> u(cn.shape);
      for (size_t i = 0; i < u.data.size(); ++i) {
        const S prod = gm.data[i] * cn.data[i];
        u.data[i] = prod + bt.data[i];
      }
      const Tensor<S> ua = ca.step(u);
      const Tensor<S> ub = cb.step(u);
      Tensor<S> ta, sb, gate;
      nn::gated_core(ua, ub, ta, sb, gate);
      for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += gate.data[i];
    }
    Tensor<S> u1 = c.up1.step(h);
    leaky_inplace(u1, S(0.2));
    Tensor<S> ur = dsp::fractional_resample_step(u1, b.scale, c.up_rs);
    h = c.up2.step(ur);
    leaky_inplace(h, S(0.2));
  }

  h = post_cs_.step(h);
  tanh_inplace(h);
  return dsp::pqmf_synthesis_step(h, gen_.bank(), syn_);
}

template class GeneratorStream<float>;
template class GeneratorStream<double>;

}  // namespace postgan::gen
