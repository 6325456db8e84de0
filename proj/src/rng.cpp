#include "bdq/rng.hpp"

#include <cmath>
#include <numbers>

namespace bdq {

double normal_variate(std::uint64_t seed, std::uint64_t sample,
                      std::uint64_t step, std::uint64_t site) {
  const double u1 = u01(counter_hash(seed, sample, step, site << 1));
  const double u2 = u01(counter_hash(seed, sample, step, (site << 1) | 1));
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

Field NoiseEnsemble::normal_field(const LatticeSpec& lat, int sample, int step,
                                  NoiseStream stream) const {
  const int L = lat.size();
  Field f(L, L);
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      f(i, j) = normal(sample, step, i + L * j, stream);
    }
  }
  return f;
}

Field standard_normal_field(const LatticeSpec& lat, std::uint64_t seed,
                            std::uint64_t index) {
  const int L = lat.size();
  Field f(L, L);
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      f(i, j) = normal_variate(seed, index, 0, i + L * j);
    }
  }
  return f;
}

}  // namespace bdq
