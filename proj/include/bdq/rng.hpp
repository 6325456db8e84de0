#pragma once

#include <cstdint>

#include "bdq/lattice.hpp"

namespace bdq {

/// SplitMix64 finalizer; the avalanche step of the counter hash.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Stateless hash of a 4-word counter. Identical inputs always give the
/// identical variate, independent of evaluation order (the CRN contract).
inline std::uint64_t counter_hash(std::uint64_t a, std::uint64_t b,
                                  std::uint64_t c, std::uint64_t d) {
  std::uint64_t h = mix64(a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  h = mix64(h ^ d);
  return h;
}

/// Uniform in (0, 1].
inline double u01(std::uint64_t h) {
  return ((h >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two lanes of the counter space.
double normal_variate(std::uint64_t seed, std::uint64_t sample,
                      std::uint64_t step, std::uint64_t site);

/// Reserved top-level streams so different consumers never collide.
enum class NoiseStream : std::uint64_t {
  kPathNoise = 0,
  kTestControl = 1,
  kMcmc = 2,
  kProbe = 3,
  kDirect = 4,
};

/**
 * Reproducible ensemble of per-sample noise streams. Nothing is stored:
 * every variate is a pure function of (seed, sample, step, site, stream).
 */
class NoiseEnsemble {
 public:
  NoiseEnsemble(std::uint64_t seed, int n_samples)
      : seed_(seed), n_samples_(n_samples) {}

  std::uint64_t seed() const { return seed_; }
  int n_samples() const { return n_samples_; }

  double normal(int sample, int step, int site,
                NoiseStream stream = NoiseStream::kPathNoise) const {
    const std::uint64_t tag =
        (static_cast<std::uint64_t>(stream) << 56) ^ static_cast<std::uint64_t>(step);
    return normal_variate(seed_, static_cast<std::uint64_t>(sample), tag,
                          static_cast<std::uint64_t>(site));
  }

  /// L x L field of iid standard normals.
  Field normal_field(const LatticeSpec& lat, int sample, int step,
                     NoiseStream stream = NoiseStream::kPathNoise) const;

 private:
  std::uint64_t seed_;
  int n_samples_;
};

/// One iid-standard-normal field from a bare (seed, index) pair.
Field standard_normal_field(const LatticeSpec& lat, std::uint64_t seed,
                            std::uint64_t index);

}  // namespace bdq
