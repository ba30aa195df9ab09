#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace zcae {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seed for a key path, e.g. (seed, epoch, batch).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {}) {
  return Rng(derive_seed(seed, keys));
}

// Uniform draw on the open interval (lo, hi).
inline double uniform_open(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (;;) {
    const double x = dist(rng);
    if (x > lo && x < hi) return x;
  }
}

// Stream purposes used with derive_seed so different consumers never share draws.
enum class Stream : std::uint64_t {
  init = 1,
  subset = 2,
  shuffle = 3,
  augment = 4,
  dropout = 5,
  synthetic = 6,
  gradcheck = 7,
};

inline std::uint64_t key(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace zcae
