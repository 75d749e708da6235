#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace flexmatch {

struct RngSeed {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  // independent lane for a different consumer of the same replicate
  RngSeed lane(std::uint64_t tag) const {
    return {master_seed ^ (0xa0761d6478bd642fULL * (tag + 1)), stream_id};
  }
};

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream: draw i of (seed, stream) is a pure function of the triple.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(RngSeed s)
      : key_(mix64(mix64(s.master_seed + 0x9e3779b97f4a7c15ULL) ^
                   mix64(s.stream_id ^ 0xd1b54a32d192ed03ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type at(std::uint64_t index) const {
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * (index + 1));
  }

  result_type operator()() { return at(counter_++); }

  std::uint64_t position() const { return counter_; }

  // [0,1)
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // (0,1]
  double uniform_open0() { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // uniform integer in [0, k) via Lemire's multiply-shift with rejection
  std::uint64_t below(std::uint64_t k) {
    if (k <= 1) return 0;
    for (;;) {
      unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * k;
      auto lo = static_cast<std::uint64_t>(m);
      if (lo >= k || lo >= (-k) % k) return static_cast<std::uint64_t>(m >> 64);
    }
  }

  // number of failures before the first success, success prob p in (0,1]
  std::uint64_t geometric_skip(double log1mp) {
    if (log1mp == -std::numeric_limits<double>::infinity()) return 0;
    double g = std::floor(std::log(uniform_open0()) / log1mp);
    if (!(g < 9.0e18)) return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(g);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace flexmatch
