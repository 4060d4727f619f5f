#pragma once

#include <cmath>
#include <cstdint>

namespace aimdq {

// SplitMix64 stream. Counter-based (output k is a pure function of seed and
// k), so sequences are reproducible across platforms and can be replayed
// from any offset.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // inverse-CDF exponential with the given rate; mean 1/rate
  double exponential(double rate) { return -std::log1p(-next_unit()) / rate; }

 private:
  std::uint64_t state_;
};

}  // namespace aimdq
