#pragma once

#include <cstdint>
#include <initializer_list>
#include <cmath>
#include <random>

namespace tnnsim {

/// Engine used throughout the simulator. Every stochastic operation takes one
/// by reference so that callers own seeding and sequencing.
using Rng = std::mt19937_64;

/// Mixes a master seed with a list of indices into an independent stream seed
/// (splitmix64 finalizer applied per component). Used wherever results must not
/// depend on iteration order, e.g. per-element array reads.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> indices) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(master);
  for (std::uint64_t i : indices) h = mix(h ^ mix(i));
  return h;
}

inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> indices) {
  return Rng(derive_seed(master, indices));
}

/// exp(sigma * N(0,1)); exactly 1 when sigma == 0 (no draw is consumed).
inline double lognormal_factor(double sigma, Rng& rng) {
  if (sigma == 0.0) return 1.0;
  std::normal_distribution<double> n(0.0, 1.0);
  return std::exp(sigma * n(rng));
}

}  // namespace tnnsim
