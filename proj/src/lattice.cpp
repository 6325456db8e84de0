#include "bdq/lattice.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bdq {

namespace {

bool is_power_of_two(int n) { return n >= 1 && (n & (n - 1)) == 0; }

}  // namespace

LatticeSpec::LatticeSpec(int sites_per_side, double spacing, double mass)
    : L_(sites_per_side), a_(spacing), m_(mass) {
  if (!is_power_of_two(L_)) {
    throw std::invalid_argument("lattice size must be a power of two");
  }
  if (!(a_ > 0.0)) throw std::invalid_argument("lattice spacing must be > 0");
  if (!(m_ > 0.0)) throw std::invalid_argument("mass must be > 0");

  lambda_.resize(L_, L_);
  const double pref = 4.0 / (a_ * a_);
  for (int k1 = 0; k1 < L_; ++k1) {
    const double s1 = std::sin(std::numbers::pi * k1 / L_);
    for (int k2 = 0; k2 < L_; ++k2) {
      const double s2 = std::sin(std::numbers::pi * k2 / L_);
      lambda_(k1, k2) = pref * (s1 * s1 + s2 * s2);
    }
  }
}

double LatticeSpec::periodic_dist2(int i, int j, int ci, int cj) const {
  int di = std::abs(i - ci);
  int dj = std::abs(j - cj);
  di = std::min(di, L_ - di);
  dj = std::min(dj, L_ - dj);
  return a_ * a_ * (di * di + dj * dj);
}

LatticeSpec make_lattice(int sites_per_side, double spacing, double mass) {
  return LatticeSpec(sites_per_side, spacing, mass);
}

namespace {

// Iterative Cooley-Tukey on a strided sequence; caller normalizes.
void fft1d(std::complex<double>* a, int n, int stride, bool inverse) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i * stride], a[j * stride]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / len * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen = std::polar(1.0, ang);
    for (int i = 0; i < n; i += len) {
      std::complex<double> w{1.0, 0.0};
      for (int j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[(i + j) * stride];
        std::complex<double> v = a[(i + j + len / 2) * stride] * w;
        a[(i + j) * stride] = u + v;
        a[(i + j + len / 2) * stride] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace

void fft2(Spectrum& data, bool inverse) {
  const int L = static_cast<int>(data.rows());
  std::complex<double>* p = data.data();
  // Eigen arrays are column-major: columns are contiguous.
  for (int c = 0; c < L; ++c) fft1d(p + c * L, L, 1, inverse);
  for (int r = 0; r < L; ++r) fft1d(p + r, L, L, inverse);
  if (inverse) data /= static_cast<double>(L) * L;
}

Spectrum forward_fft(const Field& f) {
  Spectrum s = f.cast<std::complex<double>>();
  fft2(s, false);
  return s;
}

Field inverse_fft_real(Spectrum spec) {
  fft2(spec, true);
  return spec.real();
}

Field apply_mode_multiplier(const LatticeSpec& lat, const Eigen::ArrayXXd& mult,
                            const Field& f) {
  Spectrum s = forward_fft(f);
  s *= mult.cast<std::complex<double>>();
  fft2(s, true);
  return s.real();
}

Field apply_spectral(const LatticeSpec& lat, double s, const Field& f) {
  if (!f.allFinite()) {
    throw std::invalid_argument("apply_spectral: non-finite input field");
  }
  if (s == 0.0) return f;
  const double m2 = lat.mass() * lat.mass();
  Eigen::ArrayXXd mult = (m2 + lat.mode_eigenvalues()).pow(s);
  return apply_mode_multiplier(lat, mult, f);
}

Field green_function(const LatticeSpec& lat) {
  Field delta = Field::Zero(lat.size(), lat.size());
  delta(0, 0) = 1.0;
  return apply_spectral(lat, -1.0, delta) / lat.cell_area();
}

double inner_product(const LatticeSpec& lat, const Field& f, const Field& g) {
  return lat.cell_area() * (f * g).sum();
}

double lp_norm(const LatticeSpec& lat, const Field& f, double p) {
  if (std::isinf(p)) return f.abs().maxCoeff();
  if (p < 1.0) throw std::invalid_argument("lp_norm: p must be >= 1");
  if (p == 2.0) return std::sqrt(lat.cell_area() * (f * f).sum());
  return std::pow(lat.cell_area() * f.abs().pow(p).sum(), 1.0 / p);
}

}  // namespace bdq
