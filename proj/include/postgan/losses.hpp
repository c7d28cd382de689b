#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "postgan/nncore.hpp"

namespace postgan::loss {

struct StftResolution {
  int64_t fft_size = 0;
  int64_t hop = 0;
  int64_t window_length = 0;
  void validate() const;
};

// The standard pretraining triple: (512, 50, 240), (1024, 120, 600),
// (2048, 240, 1200).
std::vector<StftResolution> default_resolutions();

// Itemized view of one objective evaluation; serializes to one training-log
// line per step.
struct LossReport {
  std::vector<double> l_sc;   // per resolution
  std::vector<double> l_mag;  // per resolution
  double l_aux = 0.0;
  std::vector<double> adv;  // per member: mean(-D_k(xhat))
  double adv_mean = 0.0;    // (1/6) sum of adv
  double total = 0.0;
  std::string line(int64_t step) const;
};

// Spectral convergence + log-magnitude distance at one resolution.
// l_sc = ||X| - |Xh||_F / ||X||_F, l_mag = mean |log|X| - log|Xh||
// with a 1e-7 magnitude floor inside the logs.
template <class S>
std::pair<nn::Var, nn::Var> stft_loss(nn::Tape<S>& tape, nn::Var xhat, nn::Var x,
                                      const StftResolution& res);

// Mean over resolutions of (l_sc + l_mag). Per-resolution values are appended
// to the report when one is passed.
template <class S>
nn::Var multires_stft_loss(nn::Tape<S>& tape, nn::Var xhat, nn::Var x,
                           const std::vector<StftResolution>& resolutions,
                           LossReport* report = nullptr);

template <class S>
nn::Var multires_stft_loss(nn::Tape<S>& tape, nn::Var xhat, nn::Var x,
                           LossReport* report = nullptr);

// Ensemble hinge: mean over members of
// mean(max(0, 1 - D_k(x))) + mean(max(0, 1 + D_k(xhat))).
template <class S>
nn::Var hinge_d_loss(nn::Tape<S>& tape, const std::vector<nn::Var>& real_scores,
                     const std::vector<nn::Var>& fake_scores);

// (1/6) sum_k mean(-D_k(xhat)).
template <class S>
nn::Var adversarial_g_loss(nn::Tape<S>& tape, const std::vector<nn::Var>& fake_scores,
                           LossReport* report = nullptr);

// total = (1/6) sum_k mean(-D_k(xhat)) + l_aux(xhat, x).
template <class S>
nn::Var generator_objective(nn::Tape<S>& tape, nn::Var xhat, nn::Var x,
                            const std::vector<nn::Var>& fake_scores,
                            LossReport* report = nullptr);

}  // namespace postgan::loss
