#pragma once

// Seed derivation for independent, reproducible random streams. Every
// stochastic step (fold assignment, bootstrap replicate, simulation
// replication) gets its own engine seeded from (master seed, index), so
// results do not depend on evaluation order or thread count.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mdspline {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for the stream identified by a path of indices below `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = mix64(master);
  for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

inline std::mt19937_64 make_engine(std::uint64_t master,
                                   std::initializer_list<std::uint64_t> path) {
  return std::mt19937_64(derive_seed(master, path));
}

}  // namespace mdspline
