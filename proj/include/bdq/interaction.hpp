#pragma once

#include "bdq/gff.hpp"
#include "bdq/lattice.hpp"

namespace bdq {

enum class InteractionKind { none, phi4, exponential };

/**
 * Which potential, its couplings, the semiclassical parameter, and the
 * spatial cutoff (indicator mask for phi4, smooth xi >= 0 for the
 * exponential model).
 */
struct InteractionSpec {
  InteractionKind kind = InteractionKind::none;
  double lambda = 0.0;
  double beta = 0.0;
  double hbar = 1.0;
  Field cutoff;
};

InteractionSpec make_free_interaction(const LatticeSpec& lat);
InteractionSpec make_phi4(const LatticeSpec& lat, double lambda, Field mask,
                          double hbar = 1.0);
InteractionSpec make_exponential(const LatticeSpec& lat, double lambda,
                                 double beta, Field xi);

/// Same interaction at semiclassical parameter hbar in (0, 1]: the sampled
/// field becomes hbar^{1/2} W and the Wick constant hbar sigma^2.
InteractionSpec semiclassical_rescale(const InteractionSpec& spec, double hbar);

/// Everything in the grid is 1 / a disk / a smooth compact bump.
Field full_mask(const LatticeSpec& lat);
Field disk_mask(const LatticeSpec& lat, double radius, int ci = 0, int cj = 0);
Field bump_field(const LatticeSpec& lat, double radius, double height = 1.0,
                 int ci = 0, int cj = 0);

/// The (possibly hbar-scaled) enhancement entering the shifted quartic:
/// w = hbar^{1/2} W_t, wick2 = hbar [[W_t^2]], wick3 = hbar^{3/2} [[W_t^3]].
struct EnhancedFields {
  Field w;
  Field wick2;
  Field wick3;
};

EnhancedFields enhanced_at(const EnhancedGFFPath& path, int j, double hbar);

/// Shifted Wick quartic without the pure-noise term:
/// lambda * int_Lambda (4 wick3 Z + 6 wick2 Z^2 + 4 w Z^3 + Z^4).
double potential_phi4_expanded(const LatticeSpec& lat,
                               const InteractionSpec& spec,
                               const EnhancedFields& enh, const Field& z);

/// lambda * int_Lambda (phi^4 - 6 sigma^2 phi^2 + 3 sigma^4); the MCMC
/// energy and the oracle for the expanded form.
double potential_phi4_direct(const LatticeSpec& lat,
                             const InteractionSpec& spec, const Field& phi,
                             double sigma2);

/// Pointwise lambda 1_Lambda (4 wick3 + 12 wick2 Z + 12 w Z^2 + 4 Z^3),
/// the gradient in the a^2 inner product.
Field grad_potential_phi4(const LatticeSpec& lat, const InteractionSpec& spec,
                          const EnhancedFields& enh, const Field& z);

/// lambda * int xi exp(beta Z) dM^beta, accumulated in shifted log form
/// when drift excursions would overflow.
double potential_exp(const LatticeSpec& lat, const InteractionSpec& spec,
                     const Field& gmc, const Field& z1);

/// Pointwise lambda beta xi exp(beta Z1) M^beta.
Field grad_potential_exp(const LatticeSpec& lat, const InteractionSpec& spec,
                         const Field& gmc, const Field& z1);

/// Semiclassical rate function lambda int phi^4 + 1/2 <phi, (m^2-Delta) phi>.
/// Deliberately the bare quartic: no Wick subtraction here.
double rate_function_J(const LatticeSpec& lat, const InteractionSpec& spec,
                       const Field& phi);

/// Gradient of J in the a^2 inner product: 4 lambda phi^3 + (m^2-Delta) phi.
Field grad_rate_function_J(const LatticeSpec& lat, const InteractionSpec& spec,
                           const Field& phi);

}  // namespace bdq
