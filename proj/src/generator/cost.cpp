#include "postgan/generator.hpp"

namespace postgan::gen {
namespace {

struct Tally {
  int64_t params = 0;
  double macs = 0.0;

  // Weight-normed conv: v (cout x cin/g x k) + g (cout) + bias (cout).
  void conv(int64_t cin, int64_t cout, int64_t k, double rate, int64_t groups = 1) {
    params += cout * (cin / groups) * k + cout + cout;
    macs += double(cout * (cin / groups) * k) * rate;
  }
};

}  // namespace

CostReport report_cost(const GeneratorConfig& cfg) {
  cfg.validate();
  const double sr = cfg.sample_rate;
  const double sub_rate = sr / cfg.num_bands;
  const int64_t k = cfg.inner_kernel;
  const auto in_ch = cfg.enc_in_channels();
  const auto& out_ch = cfg.enc_channels;

  Tally t;
  t.conv(cfg.num_bands, cfg.pre_channels, cfg.pre_kernel, sub_rate);

  // Per-block rates over one second of audio.
  std::vector<double> rate;
  double r = sub_rate;
  for (const Ratio& s : cfg.scales) {
    rate.push_back(r);
    r = r * double(s.den) / double(s.num);
  }
  const double bottleneck_rate = r;

  for (int i = 0; i < cfg.num_blocks; ++i) {
    const double ri = rate[static_cast<size_t>(i)];
    const int64_t cin = in_ch[static_cast<size_t>(i)];
    const int64_t cout = out_ch[static_cast<size_t>(i)];
    // CondNet: mel resample to this resolution (2 ops/sample/channel) + conv.
    t.macs += double(cfg.mel_bins) * ri * 2.0;
    t.conv(cfg.mel_bins, cin, k, ri);
    // Gate convs + gated activation (3 ops/element).
    t.conv(cin, cin, k, ri);
    t.conv(cin, cin, k, ri);
    t.macs += double(cin) * ri * 3.0;
    // Modulation path: fuse over the concatenation, then gamma/beta convs.
    t.conv(cin + cin, cout, k, ri);
    t.conv(cout, cout, k, ri);
    t.conv(cout, cout, k, ri);
    // Downsample block: conv -> fractional decimate -> conv.
    t.conv(cin, cout, k, ri);
    const Ratio& s = cfg.scales[static_cast<size_t>(i)];
    const double ro = ri * double(s.den) / double(s.num);
    t.macs += double(cout) * ro * 2.0;
    t.conv(cout, cout, k, ro);
  }

  double rd = bottleneck_rate;
  for (int d = 0; d < cfg.num_blocks; ++d) {
    const int e = cfg.num_blocks - 1 - d;
    const int64_t c = out_ch[static_cast<size_t>(e)];
    const int64_t cn = in_ch[static_cast<size_t>(e)];
    // gamma/beta resampled once to this block's input resolution.
    t.macs += double(c) * rd * 2.0;
    for (int u = 0; u < cfg.tade_units; ++u) {
      // channel_norm (3 ops/element) + gamma/beta affine (2 ops/element).
      t.macs += double(c) * rd * 5.0;
      t.conv(c, c, k, rd);
      t.conv(c, c, k, rd);
      t.macs += double(c) * rd * 3.0;  // gated activation
    }
    t.conv(c, cn, k, rd);
    const Ratio& s = cfg.scales[static_cast<size_t>(e)];
    rd = rd * double(s.num) / double(s.den);
    t.macs += double(cn) * rd * 2.0;
    t.conv(cn, cn, k, rd);
  }

  t.conv(cfg.pre_channels, cfg.num_bands, cfg.post_kernel, sub_rate);
  // PQMF analysis (num_bands filters at the subband rate) + synthesis.
  t.macs += double(cfg.num_bands) * double(cfg.pqmf_taps) * sub_rate;
  t.macs += double(cfg.pqmf_taps) * sr;

  CostReport report;
  report.params = t.params;
  report.macs_per_second = t.macs;
  const double ms = 1000.0 / sr;
  report.delay.frame_buffer_ms = double(cfg.frame_samples()) * ms;
  const dsp::MelConfig mel = cfg.mel();
  report.delay.mel_lookahead_ms = double(mel.window / 2 - mel.hop) * ms;
  // The analysis/synthesis cascade is LTI with taps-1 samples of group delay,
  // split evenly between the two linear-phase prototype filters.
  const int taps = cfg.num_bands == 1 ? 1 : cfg.pqmf_taps;
  report.delay.pqmf_analysis_ms = double(taps - 1) / 2.0 * ms;
  report.delay.pqmf_synthesis_ms = double(taps - 1) / 2.0 * ms;
  return report;
}

}  // namespace postgan::gen
