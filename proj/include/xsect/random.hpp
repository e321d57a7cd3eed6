#pragma once

#include <cstdint>
#include <random>

namespace xsect {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream seed for (base seed, stream index), e.g. one per tree.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix64(mix64(base) ^ mix64(stream + 0x632BE59BD9B4E019ULL));
}

// Normal(0, sigma) redrawn until |x| <= 2 sigma.
inline double truncated_normal(Rng& rng, double sigma) {
  std::normal_distribution<double> dist(0.0, sigma);
  while (true) {
    const double x = dist(rng);
    if (x >= -2.0 * sigma && x <= 2.0 * sigma) return x;
  }
}

}  // namespace xsect
