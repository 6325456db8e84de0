#pragma once

#include "bdq/lattice.hpp"

namespace bdq {

/**
 * Polynomially decaying spatial weight rho(x) = (1 + d(x, center)^2)^{-gamma}
 * with d the periodic torus distance. The exponent alpha selects the power
 * rho^alpha used inside weighted norms.
 */
struct WeightSpec {
  double gamma = 0.0;
  int center_i = 0;
  int center_j = 0;
  double alpha = 1.0;
};

Field rho_field(const WeightSpec& w, const LatticeSpec& lat);
Field rho_power(const WeightSpec& w, const LatticeSpec& lat, double alpha);

struct WeightReport {
  double max_ratio = 0.0;        // pointwise (|Lap rho^1/2| + |grad rho^1/2|) / rho^1/2
  double commutator_ratio = 0.0; // worst [Delta, rho^1/2] ratio over random fields
  bool pass = false;
};

/// Discrete analogue of the admissibility condition on rho, plus the
/// commutator bound check on random fields.
WeightReport validate_weight(const WeightSpec& w, double eps,
                             const LatticeSpec& lat,
                             std::uint64_t probe_seed = 20240901u,
                             int n_probe_fields = 100);

/// || rho^alpha <D>^s f ||_{L^p} with <D>^s the multiplier (1+lambda_k)^{s/2}.
double weighted_sobolev_norm(const LatticeSpec& lat, const Field& f,
                             const WeightSpec& w, double s, double p);

/// Number of sharp dyadic shells (including the i = -1 ball).
int n_besov_shells(const LatticeSpec& lat);

/// Sharp-annulus shell index per mode: -1 for |k| <= 1, else the dyadic
/// annulus (2^i, 2^{i+1}] containing the symmetrized frequency.
Eigen::ArrayXXi besov_shell_table(const LatticeSpec& lat);

/// Projection of f onto the modes of one shell.
Field besov_shell_project(const LatticeSpec& lat, const Field& f, int shell);

/// ( sum_i 2^{isq} || Delta_i (rho^alpha f) ||_{L^p}^q )^{1/q}; q = infinity
/// takes the sup over shells.
double besov_norm(const LatticeSpec& lat, const Field& f, const WeightSpec& w,
                  double s, double p, double q);

/// Central-difference gradient magnitude and 5-point Laplacian.
Field discrete_laplacian(const LatticeSpec& lat, const Field& f);
Field gradient_magnitude(const LatticeSpec& lat, const Field& f);

}  // namespace bdq
