#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <span>

namespace harmonica {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based seed derivation: the result depends only on the base seed and
/// the counters, never on call order or thread.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> counters) noexcept {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t c : counters) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::span<const double> coords) noexcept {
  std::uint64_t h = splitmix64(base ^ 0xd1b54a32d192ed03ULL);
  for (double c : coords) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(c + 0.0));
  return h;
}

}  // namespace harmonica
