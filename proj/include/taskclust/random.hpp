#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace taskclust {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z)
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent child seed from a master seed and a path of tags,
/// e.g. derive_seed(master, {stage, cell, trial}).
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path)
{
  std::uint64_t s = mix64(master);
  for (auto tag : path) s = mix64(s ^ mix64(tag + 0x632be59bd9b4e019ULL));
  return s;
}

/// Stage tags used when splitting a master seed.
namespace stage {
inline constexpr std::uint64_t train = 1;
inline constexpr std::uint64_t pairs = 2;
inline constexpr std::uint64_t transfer = 3;
inline constexpr std::uint64_t cluster = 4;
inline constexpr std::uint64_t cluster_models = 5;
inline constexpr std::uint64_t fsl = 6;
inline constexpr std::uint64_t sweep = 7;
inline constexpr std::uint64_t synth = 8;
} // namespace stage

} // namespace taskclust
