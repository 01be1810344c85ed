#pragma once

#include <cstdint>
#include <string_view>

namespace disprobe {

// Counter-based generator: the output at position n depends only on the
// stream key and n, so independently derived substreams never interact and
// parallel execution cannot change results.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : key_(mix(seed ^ kInit)) {}

  RngStream substream(std::string_view label) const;
  RngStream substream(uint64_t index) const;

  uint64_t next_u64() { return mix(key_ ^ mix(counter_++ + kInit)); }

  // [0,1)
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
  }
  double next_gaussian();           // standard normal, Box-Muller
  long next_poisson(double lambda); // lambda >= 0
  // uniform integer in [0, n)
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

 private:
  static constexpr uint64_t kInit = 0x9e3779b97f4a7c15ULL;
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  explicit RngStream(uint64_t key, int) : key_(key) {}

  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace disprobe
