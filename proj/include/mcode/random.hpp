#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mcode {

/// Explicit 64-bit RNG seed. There is no global generator anywhere in the library.
struct Seed {
  std::uint64_t value = 0;

  friend bool operator==(Seed, Seed) = default;
};

using Rng = std::mt19937_64;

/// Derives an independent child seed from a parent seed and a tag path
/// (e.g. {repeat, fold, purpose}). SplitMix64 finalizer over each component.
inline Seed derive_seed(Seed parent, std::initializer_list<std::uint64_t> tags) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(parent.value);
  for (std::uint64_t t : tags) h = mix(h ^ mix(t));
  return Seed{h};
}

inline Rng make_rng(Seed seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed.value), static_cast<std::uint32_t>(seed.value >> 32)};
  return Rng(seq);
}

}  // namespace mcode
