#include "postgan/discriminator.hpp"

#include <stdexcept>
#include <utility>

namespace postgan::disc {

namespace {

double cutoff_for(int64_t bands) {
  switch (bands) {
    case 1: return 0.5;
    case 2: return 0.25;
    case 4: return 0.142;
    default: throw std::invalid_argument("discriminator: bands must be 1, 2 or 4");
  }
}

}  // namespace

DiscConfig DiscConfig::tiny() {
  DiscConfig cfg;
  cfg.base_channels = 4;
  cfg.mid_channels = 8;
  return cfg;
}

void DiscConfig::validate() const {
  if (base_channels <= 0 || mid_channels <= 0)
    throw std::invalid_argument("disc_config: channel counts must be positive");
  if (base_channels % 4 != 0 || mid_channels % 4 != 0)
    throw std::invalid_argument(
        "disc_config: channel counts must be divisible by the group count 4");
  if (window < 64 || window % 4 != 0)
    throw std::invalid_argument("disc_config: window must be >= 64 and a multiple of 4");
  if (pqmf_taps < 2) throw std::invalid_argument("disc_config: pqmf_taps too small");
}

WindowSlice sample_window(int64_t source_len, Rng& rng, int64_t window) {
  if (source_len < window)
    throw std::invalid_argument("sample_window: signal shorter than the window");
  WindowSlice slice;
  slice.start = rng.below(source_len - window + 1);
  slice.length = window;
  slice.source_len = source_len;
  return slice;
}

template <class S>
Discriminator<S>::Discriminator(const DiscConfig& cfg, MemberSpec spec,
                                std::string prefix)
    : cfg_(cfg), spec_(spec), prefix_(std::move(prefix)) {
  cfg_.validate();
  if (spec_.factor != 1 && spec_.factor != 2 && spec_.factor != 4)
    throw std::invalid_argument("discriminator: factor must be 1, 2 or 4");
  if (spec_.kind == MemberKind::kSubband)
    bank_ = dsp::design_pqmf(static_cast<int>(spec_.factor),
                             static_cast<int>(cfg_.pqmf_taps), cfg_.pqmf_beta,
                             cutoff_for(spec_.factor));

  const int64_t in_ch = spec_.kind == MemberKind::kSubband ? spec_.factor : 1;
  const int64_t base = cfg_.base_channels;
  const int64_t mid = cfg_.mid_channels;
  layers_.push_back(nn::Conv1d<S>{prefix_ + ".l1", in_ch, base, 7, 2, 1, 1});
  layers_.push_back(nn::Conv1d<S>{prefix_ + ".l2", base, mid, 7, 2, 1, 4});
  layers_.push_back(nn::Conv1d<S>{prefix_ + ".l3", mid, mid, 7, 2, 1, 4});
  layers_.push_back(nn::Conv1d<S>{prefix_ + ".l4", mid, mid, 5, 2, 1, 1});
  head_ = nn::Conv1d<S>{prefix_ + ".head", mid, 1, 1, 1, 1, 1};
}

template <class S>
void Discriminator<S>::init(nn::WeightStore<S>& store, Rng& rng) const {
  for (const auto& l : layers_) l.init(store, rng);
  head_.init(store, rng);
}

template <class S>
nn::Var Discriminator<S>::forward(nn::Tape<S>& tape, const nn::WeightStore<S>& store,
                                  nn::Var x) const {
  const int64_t x_ch = tape.val(x).channels();
  const int64_t x_len = tape.val(x).length();
  if (x_ch != 1)
    throw std::invalid_argument("discriminator: input must be (1, L)");

  nn::Var h = x;
  if (spec_.kind == MemberKind::kSubband) {
    if (x_len != cfg_.window)
      throw std::invalid_argument("discriminator: subband member expects a window slice");
    h = tape.pqmf_analyze(h, bank_);
  } else {
    if (x_len < cfg_.window * spec_.factor)
      throw std::invalid_argument("discriminator: segment too short for this scale");
    if (spec_.factor > 1) h = tape.avg_pool(h, spec_.factor);
  }

  for (const auto& l : layers_)
    h = tape.leaky_relu(l.forward(tape, store, h), S(0.2));
  return head_.forward(tape, store, h);
}

template <class S>
DiscriminatorEnsemble<S>::DiscriminatorEnsemble(const DiscConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int64_t factors[3] = {1, 2, 4};
  for (int i = 0; i < 3; ++i)
    members_.emplace_back(cfg_, MemberSpec{MemberKind::kSubband, factors[i]},
                          "d" + std::to_string(i + 1));
  for (int i = 0; i < 3; ++i)
    members_.emplace_back(cfg_, MemberSpec{MemberKind::kMultiscale, factors[i]},
                          "d" + std::to_string(i + 4));
}

template <class S>
void DiscriminatorEnsemble<S>::init(nn::WeightStore<S>& store, Rng& rng) const {
  for (const auto& m : members_) m.init(store, rng);
}

template <class S>
std::vector<WindowSlice> DiscriminatorEnsemble<S>::draw_windows(int64_t source_len,
                                                                Rng& rng) const {
  std::vector<WindowSlice> windows;
  for (int i = 0; i < 3; ++i)
    windows.push_back(sample_window(source_len, rng, cfg_.window));
  return windows;
}

template <class S>
std::vector<nn::Var> DiscriminatorEnsemble<S>::forward(
    nn::Tape<S>& tape, const nn::WeightStore<S>& store, nn::Var x,
    const std::vector<WindowSlice>& windows) const {
  // Snapshot the shape: pushing member graphs can reallocate the tape's node
  // storage, so no reference into it may be held across forward calls.
  const int64_t x_ch = tape.val(x).channels();
  const int64_t x_len = tape.val(x).length();
  if (x_ch != 1)
    throw std::invalid_argument("discriminator: input must be (1, L)");
  if (x_len < cfg_.window * 4)
    throw std::invalid_argument("discriminator: segment shorter than 4 windows");
  if (windows.size() != 3)
    throw std::invalid_argument("discriminator: expected one window per subband member");

  std::vector<nn::Var> scores;
  for (size_t i = 0; i < members_.size(); ++i) {
    nn::Var input = x;
    if (members_[i].spec().kind == MemberKind::kSubband) {
      const WindowSlice& w = windows[i];
      if (w.length != cfg_.window || w.start < 0 || w.start + w.length > x_len)
        throw std::invalid_argument("discriminator: window outside the segment");
      input = tape.slice_time(x, w.start, w.length);
    }
    scores.push_back(members_[i].forward(tape, store, input));
  }
  return scores;
}

template <class S>
std::vector<nn::Var> DiscriminatorEnsemble<S>::forward(nn::Tape<S>& tape,
                                                       const nn::WeightStore<S>& store,
                                                       nn::Var x, Rng& rng) const {
  return forward(tape, store, x, draw_windows(tape.val(x).length(), rng));
}

template class Discriminator<float>;
template class Discriminator<double>;
template class DiscriminatorEnsemble<float>;
template class DiscriminatorEnsemble<double>;

}  // namespace postgan::disc
