#include "disprobe/rng.hpp"

#include <cmath>

namespace disprobe {

RngStream RngStream::substream(std::string_view label) const {
  // FNV-1a over the label, folded into the parent key.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return RngStream(mix(key_ ^ h), 0);
}

RngStream RngStream::substream(uint64_t index) const {
  return RngStream(mix(key_ + mix(index ^ 0xd1342543de82ef95ULL)), 0);
}

double RngStream::next_gaussian() {
  // Box-Muller; consumes two uniforms per call, no cached second value.
  double u1 = next_uniform();
  double u2 = next_uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

long RngStream::next_poisson(double lambda) {
  if (lambda <= 0.0) return 0;
  if (lambda < 200.0) {
    // Knuth multiplication method.
    const double limit = std::exp(-lambda);
    double p = 1.0;
    long k = 0;
    do {
      ++k;
      p *= next_uniform();
    } while (p > limit);
    return k - 1;
  }
  // Normal approximation for large rates.
  double v = lambda + std::sqrt(lambda) * next_gaussian();
  return v < 0.0 ? 0 : static_cast<long>(std::lround(v));
}

}  // namespace disprobe
