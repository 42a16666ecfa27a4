#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

namespace sylva {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Stateless random stream: every draw is a hash of (key path, counter), so a
/// value never depends on how many draws happened before it or on which
/// thread asked for it.
class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t seed) : key_(splitmix64(seed)) {}
  constexpr CounterRng(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
      : key_(splitmix64(seed)) {
    for (auto p : path) key_ = splitmix64(key_ ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  }

  /// Sub-stream for one more level of the key path.
  constexpr CounterRng child(std::uint64_t k) const {
    CounterRng r(0);
    r.key_ = splitmix64(key_ ^ splitmix64(k + 0x632BE59BD9B4E019ULL));
    return r;
  }

  constexpr std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64(key_ ^ splitmix64(counter ^ 0xD1B54A32D192ED03ULL));
  }

  /// Uniform in [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const {
    return static_cast<std::uint64_t>(uniform(counter) * static_cast<double>(n)) % n;
  }

  /// Standard normal from the Box-Muller pair at (counter, counter + 1).
  double normal(std::uint64_t counter) const {
    const double u1 = 1.0 - uniform(counter);  // (0, 1]
    const double u2 = uniform(counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

/// Per-stage seed derived from the top-level seed: splitmix64(seed ^ fnv1a(stage)).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) {
  return splitmix64(seed ^ fnv1a(stage));
}

}  // namespace sylva
