#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace deconas {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective mix of one 64-bit word.
std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based derivation of independent seeds from a root seed.
/// Streams are keyed by name so that adding a subsystem never shifts the
/// numbers another subsystem sees.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t counter);

/// Uniform double in [0, 1) using the top 53 bits of one engine draw.
double uniform01(Rng& rng);

/// Uniform double in [0, 1) as a pure function of (seed, counter).
double hashed_uniform01(std::uint64_t seed, std::uint64_t counter);

/// Standard normal via Box-Muller on uniform01 draws (platform independent).
double standard_normal(Rng& rng);

}  // namespace deconas
