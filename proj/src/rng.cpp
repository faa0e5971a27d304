#include "uapforge/rng.hpp"

#include "uapforge/errors.hpp"

namespace uapforge {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng derive_stream(std::uint64_t seed, std::string_view tag) {
  const std::uint64_t t = fnv1a64(tag);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
  return Rng(seq);
}

Rng derive_stream(std::uint64_t seed, std::string_view tag, std::uint64_t key) {
  const std::uint64_t t = fnv1a64(tag);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(t),    static_cast<std::uint32_t>(t >> 32),
                    static_cast<std::uint32_t>(key),  static_cast<std::uint32_t>(key >> 32)};
  return Rng(seq);
}

double sample_symmetric_beta(Rng& rng, double a) {
  if (!(a > 0.0)) throw ParameterError("Beta shape must be positive, got " + std::to_string(a));
  std::gamma_distribution<double> gamma(a, 1.0);
  const double x = gamma(rng);
  const double y = gamma(rng);
  if (x + y == 0.0) return 0.5;
  return x / (x + y);
}

}  // namespace uapforge
