#include "postgan/losses.hpp"

#include <cstdio>
#include <stdexcept>

namespace postgan::loss {

void StftResolution::validate() const {
  if (fft_size <= 0 || hop <= 0 || window_length <= 0)
    throw std::invalid_argument("stft_resolution: sizes must be positive");
  if (window_length > fft_size)
    throw std::invalid_argument("stft_resolution: window longer than fft");
  if (hop >= window_length)
    throw std::invalid_argument("stft_resolution: hop must be below the window");
}

std::vector<StftResolution> default_resolutions() {
  return {{512, 50, 240}, {1024, 120, 600}, {2048, 240, 1200}};
}

std::string LossReport::line(int64_t step) const {
  std::string out = "step " + std::to_string(step);
  const auto join = [](const std::vector<double>& v) {
    std::string s;
    char buf[32];
    for (size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.6f", v[i]);
      if (i) s += ",";
      s += buf;
    }
    return s.empty() ? std::string("-") : s;
  };
  char buf[64];
  out += " l_sc " + join(l_sc) + " l_mag " + join(l_mag);
  std::snprintf(buf, sizeof(buf), " l_aux %.6f adv %.6f total %.6f", l_aux,
                adv_mean, total);
  out += buf;
  return out;
}

template <class S>
std::pair<nn::Var, nn::Var> stft_loss(nn::Tape<S>& tape, nn::Var xhat, nn::Var x,
                                      const StftResolution& res) {
  res.validate();
  const Tensor<S>& a = tape.val(xhat);
  const Tensor<S>& b = tape.val(x);
  if (a.shape != b.shape)
    throw std::invalid_argument("stft_loss: signal lengths differ");
  if (a.length() < res.window_length)
    throw std::invalid_argument("stft_loss: signal shorter than the window");

  const nn::Var mh = tape.stft_mag(xhat, static_cast<int>(res.fft_size),
                                   static_cast<int>(res.hop),
                                   static_cast<int>(res.window_length));
  const nn::Var mx = tape.stft_mag(x, static_cast<int>(res.fft_size),
                                   static_cast<int>(res.hop),
                                   static_cast<int>(res.window_length));

  const nn::Var diff = tape.sub(mx, mh);
  const nn::Var num = tape.sqrt_op(tape.sum(tape.mul(diff, diff)));
  const nn::Var den = tape.sqrt_op(tape.sum(tape.mul(mx, mx)));
  const nn::Var l_sc = tape.div(num, den);

  const S floor = static_cast<S>(1e-7);
  const nn::Var l_mag = tape.mean(tape.abs_op(
      tape.sub(tape.log_clamped(mx, floor), tape.log_clamped(mh, floor))));
  return {l_sc, l_mag};
}

template <class S>
nn::Var multires_stft_loss(nn::Tape<S>& tape, nn::Var xhat, nn::Var x,
                           const std::vector<StftResolution>& resolutions,
                           LossReport* report) {
  if (resolutions.empty())
    throw std::invalid_argument("multires_stft_loss: no resolutions");
  nn::Var acc = -1;
  for (const StftResolution& res : resolutions) {
    const auto [l_sc, l_mag] = stft_loss(tape, xhat, x, res);
    if (report != nullptr) {
      report->l_sc.push_back(static_cast<double>(tape.val(l_sc).data[0]));
      report->l_mag.push_back(static_cast<double>(tape.val(l_mag).data[0]));
    }
    const nn::Var term = tape.add(l_sc, l_mag);
    acc = acc < 0 ? term : tape.add(acc, term);
  }
  acc = tape.affine(acc, static_cast<S>(1.0 / double(resolutions.size())), S(0));
  if (report != nullptr)
    report->l_aux = static_cast<double>(tape.val(acc).data[0]);
  return acc;
}

template <class S>
nn::Var multires_stft_loss(nn::Tape<S>& tape, nn::Var xhat, nn::Var x,
                           LossReport* report) {
  return multires_stft_loss(tape, xhat, x, default_resolutions(), report);
}

template <class S>
nn::Var hinge_d_loss(nn::Tape<S>& tape, const std::vector<nn::Var>& real_scores,
                     const std::vector<nn::Var>& fake_scores) {
  if (real_scores.size() != 6 || fake_scores.size() != 6)
    throw std::invalid_argument("hinge_d_loss: expected six members");
  nn::Var acc = -1;
  for (size_t k = 0; k < 6; ++k) {
    // max(0, 1 - real) and max(0, 1 + fake), averaged over the score map.
    const nn::Var real_term =
        tape.mean(tape.relu(tape.affine(real_scores[k], S(-1), S(1))));
    const nn::Var fake_term =
        tape.mean(tape.relu(tape.affine(fake_scores[k], S(1), S(1))));
    const nn::Var term = tape.add(real_term, fake_term);
    acc = acc < 0 ? term : tape.add(acc, term);
  }
  return tape.affine(acc, static_cast<S>(1.0 / 6.0), S(0));
}

template <class S>
nn::Var adversarial_g_loss(nn::Tape<S>& tape, const std::vector<nn::Var>& fake_scores,
                           LossReport* report) {
  if (fake_scores.size() != 6)
    throw std::invalid_argument("adversarial_g_loss: expected six members");
  nn::Var acc = -1;
  for (size_t k = 0; k < 6; ++k) {
    const nn::Var term = tape.mean(tape.affine(fake_scores[k], S(-1), S(0)));
    if (report != nullptr)
      report->adv.push_back(static_cast<double>(tape.val(term).data[0]));
    acc = acc < 0 ? term : tape.add(acc, term);
  }
  acc = tape.affine(acc, static_cast<S>(1.0 / 6.0), S(0));
  if (report != nullptr)
    report->adv_mean = static_cast<double>(tape.val(acc).data[0]);
  return acc;
}

template <class S>
nn::Var generator_objective(nn::Tape<S>& tape, nn::Var xhat, nn::Var x,
                            const std::vector<nn::Var>& fake_scores,
                            LossReport* report) {
  const nn::Var adv = adversarial_g_loss(tape, fake_scores, report);
  const nn::Var aux = multires_stft_loss(tape, xhat, x, default_resolutions(), report);
  const nn::Var total = tape.add(adv, aux);
  if (report != nullptr)
    report->total = static_cast<double>(tape.val(total).data[0]);
  return total;
}

#define POSTGAN_LOSS_INSTANCE(S)                                                    \
  template std::pair<nn::Var, nn::Var> stft_loss<S>(nn::Tape<S>&, nn::Var, nn::Var, \
                                                    const StftResolution&);         \
  template nn::Var multires_stft_loss<S>(nn::Tape<S>&, nn::Var, nn::Var,            \
                                         const std::vector<StftResolution>&,        \
                                         LossReport*);                              \
  template nn::Var multires_stft_loss<S>(nn::Tape<S>&, nn::Var, nn::Var,            \
                                         LossReport*);                              \
  template nn::Var hinge_d_loss<S>(nn::Tape<S>&, const std::vector<nn::Var>&,       \
                                   const std::vector<nn::Var>&);                    \
  template nn::Var adversarial_g_loss<S>(nn::Tape<S>&, const std::vector<nn::Var>&, \
                                         LossReport*);                              \
  template nn::Var generator_objective<S>(nn::Tape<S>&, nn::Var, nn::Var,           \
                                          const std::vector<nn::Var>&, LossReport*);

POSTGAN_LOSS_INSTANCE(float)
POSTGAN_LOSS_INSTANCE(double)
#undef POSTGAN_LOSS_INSTANCE

}  // namespace postgan::loss
