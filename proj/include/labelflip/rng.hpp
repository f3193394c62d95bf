#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace labelflip {

/// Portable seeded PRNG: xoshiro256** with its state expanded from a 64-bit
/// seed by splitmix64.
///
///   splitmix64:  s += 0x9e3779b97f4a7c15;
///                z = (s ^ (s >> 30)) * 0xbf58476d1ce4e5b9;
///                z = (z ^ (z >> 27)) * 0x94d049bb133111eb;
///                return z ^ (z >> 31);
///
///   xoshiro256**: result = rotl(s1 * 5, 7) * 9;
///                 t = s1 << 17;
///                 s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3;
///                 s2 ^= t;  s3 = rotl(s3, 45);
///
/// Derived quantities are defined on top of next() so that every
/// implementation produces the same streams:
///   uniform01()     = (next() >> 11) * 2^-53
///   below(bound)    = rejection sampling on next() (no modulo bias)
///   shuffle(v)      = Fisher-Yates from the back, j = below(i + 1)
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform01();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  /// Identity permutation of 0..n-1 shuffled in place.
  std::vector<std::size_t> permutation(std::size_t n);

private:
  std::array<std::uint64_t, 4> state_{};
};

/// Mixes a base seed with a stream index; used to give each fold / cell its
/// own independent generator.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace labelflip
