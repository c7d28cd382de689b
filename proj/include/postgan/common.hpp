#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace postgan {

// Exact rational resampling ratio, output rate over input rate.
struct Ratio {
  int64_t num = 1;
  int64_t den = 1;

  Ratio() = default;
  Ratio(int64_t n, int64_t d) : num(n), den(d) {
    if (n <= 0 || d <= 0) throw std::invalid_argument("Ratio: must be positive");
    const int64_t g = std::gcd(n, d);
    num /= g;
    den /= g;
  }

  bool is_one() const { return num == den; }
  bool operator==(const Ratio& o) const { return num == o.num && den == o.den; }
  Ratio inverse() const { return Ratio(den, num); }
  double value() const { return double(num) / double(den); }
  std::string str() const;
};

// Counter-style PRNG with fully serializable state (xoshiro256**, split-mix
// seeded). Gaussian draws use Box-Muller without a cached spare so the state
// is exactly the four words.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed);
  uint64_t next_u64();
  // uniform in [0, 1)
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // standard normal
  double gaussian();
  // uniform integer in [0, n)
  uint64_t below(uint64_t n);

  void state(uint64_t out[4]) const {
    for (int i = 0; i < 4; ++i) out[i] = s_[i];
  }
  void set_state(const uint64_t in[4]) {
    for (int i = 0; i < 4; ++i) s_[i] = in[i];
  }

 private:
  uint64_t s_[4] = {1, 2, 3, 4};
};

}  // namespace postgan
