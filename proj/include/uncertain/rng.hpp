#pragma once

// splitmix64-ctr, version 1.
//
// Output i (counting from 1) of a stream with seed s is
//
//   mix64(s + i * 0x9E3779B97F4A7C15)      (all arithmetic mod 2^64)
//
// where mix64 is the splitmix64 finalizer:
//
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   z =  z ^ (z >> 31)
//
// Derived quantities:
//   uniform01()          = (next() >> 11) * 2^-53, in [0, 1)
//   uniform_int(lo, hi)  = lo + x % n, n = hi - lo + 1, drawing x = next()
//                          until x < 2^64 - (2^64 mod n)
//   uniform_real(a, b)   = a + (b - a) * uniform01()
//
// Any implementation following these rules reproduces decision logs exactly.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace uncertain {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a, used to fold identifiers into seed derivations.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Folds a list of words into one seed: h = mix64(h + w + gamma) per word.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = mix64(base);
  for (const auto w : words) h = mix64(h + w + kGoldenGamma);
  return h;
}

class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-ctr/1";

  explicit constexpr Rng(std::uint64_t seed = 0) : seed_(seed) {}

  constexpr std::uint64_t seed() const { return seed_; }
  constexpr std::uint64_t counter() const { return counter_; }

  constexpr std::uint64_t next() {
    ++counter_;
    return mix64(seed_ + counter_ * kGoldenGamma);
  }

  constexpr double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  constexpr double uniform_real(double a, double b) {
    return a + (b - a) * uniform01();
  }

  // Inclusive on both ends.
  constexpr std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const std::uint64_t n =
        static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    if (n == 0) return static_cast<std::int64_t>(next());  // full 64-bit span
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
    std::uint64_t x = next();
    while (x > limit) x = next();
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + x % n);
  }

  // Uniform index in [0, n).
  constexpr std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace uncertain
