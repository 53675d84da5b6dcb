#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace sem::rng {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive mix of a seed with a list of stream coordinates.
inline constexpr std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) noexcept {
  std::uint64_t h = splitmix64(seed);
  for (auto c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

/// Uniform double in [0, 1) from the top 53 bits. Portable across standard
/// libraries, unlike std::uniform_real_distribution.
inline constexpr double unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Counter-based uniform: value depends only on (seed, coords).
inline constexpr double counter_uniform(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) noexcept {
  return unit(derive(seed, coords));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> coords = {}) {
  return Engine(derive(seed, coords));
}

inline double uniform(Engine& eng) { return unit(eng()); }

/// Uniform integer in [0, n) by rejection, independent of library distributions.
inline std::uint64_t below(Engine& eng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = eng();
  } while (r >= limit);
  return r % n;
}

template <class It>
void shuffle(It first, It last, Engine& eng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    auto j = below(eng, i);
    std::iter_swap(first + (i - 1), first + j);
  }
}

}  // namespace sem::rng
