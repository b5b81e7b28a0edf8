#pragma once

#include <cstdint>

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream, counter), so results do not depend on evaluation order
// or on how work is split across threads.
namespace contagion::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t counter) noexcept {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter);
}

// Child seed for a named sub-purpose of a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose) noexcept {
  return hash(master, 0x5eedULL, purpose);
}

// Uniform on the open interval (0, 1).
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
  return (static_cast<double>(hash(seed, stream, counter) >> 11) + 0.5) * 0x1.0p-53;
}

double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept;

// Fixed purposes for hierarchical seed splitting.
enum Purpose : std::uint64_t {
  kPaths = 1,
  kTypeSampling = 2,
  kMeanFieldIdiosyncratic = 3,
  kCommonNoise = 4,
  kInitialAssets = 5,
  kFitRestarts = 6,
};

}  // namespace contagion::rng
