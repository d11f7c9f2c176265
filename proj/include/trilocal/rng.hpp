#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace trilocal {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives the key of an independent stream from a parent key and an index.
constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

/// Counter-based generator: the n-th draw is a pure function of (key, n), so
/// streams can be split and consumed in any order without changing values.
/// Distribution transforms are implemented here rather than through
/// <random> so that sequences are identical across standard libraries.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() { return mix64(key_ ^ mix64(counter_++)); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  /// Fills `out` with a point drawn uniformly from the probability simplex.
  void simplex(std::span<double> out) {
    double total = 0.0;
    for (double& x : out) {
      x = -std::log(uniform_open());
      total += x;
    }
    for (double& x : out) x /= total;
  }

  CounterRng split(std::uint64_t index) const { return CounterRng(derive_stream(key_, index)); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace trilocal
