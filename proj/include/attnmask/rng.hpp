#pragma once

#include <cstdint>
#include <string_view>

namespace attnmask {

// splitmix64-seeded xoshiro256**. Output is identical on every platform,
// unlike the std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  // Standard normal (Box-Muller).
  double normal();

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t x);
// Stable 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
// Per-item stream seed: hash(seed, id).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view id);

}  // namespace attnmask
