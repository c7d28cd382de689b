#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "postgan/common.hpp"
#include "postgan/dsp.hpp"
#include "postgan/nncore.hpp"

namespace postgan::disc {

// Width knobs for one discriminator member. The stack is four strided causal
// convolutions (stride 2, kernels 7/7/7/5, grouped in the middle) under weight
// norm, followed by a 1x1 score head.
struct DiscConfig {
  int64_t base_channels = 16;  // width after the first conv
  int64_t mid_channels = 32;   // width of the grouped middle and top convs
  int64_t window = 512;        // subband slice length in samples
  int64_t pqmf_taps = 62;
  double pqmf_beta = 9.0;

  static DiscConfig tiny();  // <= 8 channels, for gradient checks
  void validate() const;
};

enum class MemberKind { kSubband, kMultiscale };

struct MemberSpec {
  MemberKind kind = MemberKind::kSubband;
  int64_t factor = 1;  // PQMF bands for subband members, pool factor otherwise
};

// A randomly placed fixed-length window into a longer signal.
struct WindowSlice {
  int64_t start = 0;
  int64_t length = 0;
  int64_t source_len = 0;
};

// Uniform draw of a window start over [0, source_len - window].
WindowSlice sample_window(int64_t source_len, Rng& rng, int64_t window = 512);

template <class S>
class Discriminator {
 public:
  Discriminator(const DiscConfig& cfg, MemberSpec spec, std::string prefix);

  const MemberSpec& spec() const { return spec_; }
  const std::string& prefix() const { return prefix_; }
  const std::vector<nn::Conv1d<S>>& layers() const { return layers_; }
  const nn::Conv1d<S>& head() const { return head_; }

  void init(nn::WeightStore<S>& store, Rng& rng) const;

  // x must be (1, L). Subband members require L == window and run their PQMF
  // bank first; multiscale members require L >= window * factor and average-
  // pool by the factor. Returns a (1, T) score map without activation.
  nn::Var forward(nn::Tape<S>& tape, const nn::WeightStore<S>& store,
                  nn::Var x) const;

 private:
  DiscConfig cfg_;
  MemberSpec spec_;
  std::string prefix_;
  dsp::PqmfBank bank_;  // subband members only
  std::vector<nn::Conv1d<S>> layers_;
  nn::Conv1d<S> head_;
};

// Six members: d1..d3 subband over PQMF 1/2/4 bands of a random 512-sample
// window, d4..d6 multiscale over the full segment average-pooled by 1/2/4.
template <class S>
class DiscriminatorEnsemble {
 public:
  explicit DiscriminatorEnsemble(const DiscConfig& cfg = DiscConfig{});

  const DiscConfig& config() const { return cfg_; }
  const std::vector<Discriminator<S>>& members() const { return members_; }

  void init(nn::WeightStore<S>& store, Rng& rng) const;

  // One independent window per subband member. Drawing is separated from
  // evaluation so a training step can score real and fake audio on identical
  // slices.
  std::vector<WindowSlice> draw_windows(int64_t source_len, Rng& rng) const;

  std::vector<nn::Var> forward(nn::Tape<S>& tape, const nn::WeightStore<S>& store,
                               nn::Var x,
                               const std::vector<WindowSlice>& windows) const;

  // Convenience overload: fresh windows from the rng, then evaluate.
  std::vector<nn::Var> forward(nn::Tape<S>& tape, const nn::WeightStore<S>& store,
                               nn::Var x, Rng& rng) const;

 private:
  DiscConfig cfg_;
  std::vector<Discriminator<S>> members_;
};

}  // namespace postgan::disc
