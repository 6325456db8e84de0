#pragma once

#include <Eigen/Dense>
#include <complex>

namespace bdq {

/// One real scalar field sample on the L x L grid. Entry (i, j) is the
/// value at site x = (i, j); the physical position is a * (i, j).
using Field = Eigen::ArrayXXd;
using Spectrum = Eigen::ArrayXXcd;

/**
 * Periodic 2d lattice with mass m > 0. Owns the mode eigenvalue table of
 * the discrete Laplacian, so that (m^2 - Delta)^s acts as the Fourier
 * multiplier (m^2 + lambda_k)^s with
 *
 *   lambda_k = (4/a^2) (sin^2(pi k1 / L) + sin^2(pi k2 / L)).
 *
 * All inner products and L^p norms carry the a^2 cell measure.
 */
class LatticeSpec {
 public:
  LatticeSpec(int sites_per_side, double spacing, double mass);

  int size() const { return L_; }
  int n_sites() const { return L_ * L_; }
  double spacing() const { return a_; }
  double mass() const { return m_; }
  double side_length() const { return a_ * L_; }
  double cell_area() const { return a_ * a_; }

  /// lambda_k table, indexed like a Field (k1, k2).
  const Eigen::ArrayXXd& mode_eigenvalues() const { return lambda_; }

  /// Squared periodic distance (in physical units) from site (i,j) to
  /// site (ci,cj), minimized over torus images.
  double periodic_dist2(int i, int j, int ci, int cj) const;

 private:
  int L_;
  double a_;
  double m_;
  Eigen::ArrayXXd lambda_;
};

/// Factory with the precondition checks (L power of two, a > 0, m > 0).
LatticeSpec make_lattice(int sites_per_side, double spacing, double mass);

/// In-place 2d radix-2 FFT. Forward uses kernel exp(-2 pi i k.x / L);
/// the inverse applies the 1/L^2 normalization.
void fft2(Spectrum& data, bool inverse);

Spectrum forward_fft(const Field& f);
Field inverse_fft_real(Spectrum spec);

/// (m^2 - Delta)^s as a spectral multiplier. Rejects non-finite input.
Field apply_spectral(const LatticeSpec& lat, double s, const Field& f);

/// Generic real mode-space multiplier table applied to a real field.
Field apply_mode_multiplier(const LatticeSpec& lat, const Eigen::ArrayXXd& mult,
                            const Field& f);

/// Translation-invariant kernel G(r) of (m^2 - Delta)^{-1}, so that the
/// covariance operator acts as (C f)(x) = a^2 sum_y G(x - y) f(y).
Field green_function(const LatticeSpec& lat);

/// <f, g> = a^2 sum_x f(x) g(x).
double inner_product(const LatticeSpec& lat, const Field& f, const Field& g);

/// (a^2 sum |f|^p)^{1/p}; p = infinity gives the max norm.
double lp_norm(const LatticeSpec& lat, const Field& f, double p);

}  // namespace bdq
