#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace uapforge {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a. Used for stable token hashing and config digests.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Independent generator for one consumer (init, shuffle, augment, ...) of a
/// run seeded with `seed`. Same (seed, tag) always yields the same stream.
Rng derive_stream(std::uint64_t seed, std::string_view tag);

/// Same as above with an extra integer key (sample index, pass number).
Rng derive_stream(std::uint64_t seed, std::string_view tag, std::uint64_t key);

/// Symmetric Beta(a, a) draw via two Gamma variates.
double sample_symmetric_beta(Rng& rng, double a);

}  // namespace uapforge
