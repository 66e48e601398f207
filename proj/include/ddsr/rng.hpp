#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace ddsr {

// Deterministic PRNG built on raw mt19937_64 output. Distributions are
// derived here by hand (not via std::*_distribution, whose sequences are
// implementation-defined) so that seeded runs replay identically.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n), n > 0
  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ddsr
