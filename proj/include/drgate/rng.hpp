#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace drgate {

using Rng = std::mt19937_64;

/// Stream roles used when deriving child seeds. Every random draw in the
/// library comes from an Rng seeded by derive_seed(master, {role, indices...}),
/// so streams for different replications, folds and models never overlap
/// in their seeding.
enum StreamRole : std::uint64_t {
  kStreamData = 1,
  kStreamFolds = 2,
  kStreamPropensity = 3,
  kStreamOutcome0 = 4,
  kStreamOutcome1 = 5,
  kStreamCv = 6,
  kStreamForest = 7,
  kStreamReplication = 8,
  kStreamPipeline = 9,
  kStreamMember = 10,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = mix64(master);
  for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

}  // namespace drgate
