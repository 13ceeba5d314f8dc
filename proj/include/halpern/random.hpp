#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace halpern {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed for the substream (stream, counter) of a master seed. Streams are
/// independent of the order in which they are requested.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream,
                                    std::uint64_t counter) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s = h ^ (stream * 0xD1B54A32D192ED03ULL);
  h = splitmix64(s);
  s = h ^ (counter * 0xABC98388FB8FAC03ULL);
  return splitmix64(s);
}

inline Rng make_stream(std::uint64_t master, std::uint64_t stream, std::uint64_t counter = 0) {
  return Rng(substream_seed(master, stream, counter));
}

/// Uniform integer in [0, n) by Lemire's multiply-shift with rejection.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t range = n;
  std::uint64_t x = rng();
  __uint128_t m = static_cast<__uint128_t>(x) * range;
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      x = rng();
      m = static_cast<__uint128_t>(x) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace halpern
