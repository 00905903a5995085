#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace drivelab {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent substream seed for a (base, tag...) path, e.g.
// derive_seed(run_seed, step, scenario_id, rollout). Order matters.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t tag : path) h = splitmix64(h ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(base, path));
}

}  // namespace drivelab
