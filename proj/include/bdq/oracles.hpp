#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bdq/interaction.hpp"
#include "bdq/lattice.hpp"
#include "bdq/observable.hpp"
#include "bdq/weight.hpp"

namespace bdq {

struct MCMCConfig {
  enum class Algorithm { rwm, hmc };
  Algorithm algorithm = Algorithm::rwm;
  double step_size = 0.3;  // pCN mixing parameter / leapfrog step
  int leapfrog_steps = 8;
  int burn_in = 500;
  int thin = 4;
  int n_chains = 2;
  int n_samples = 2000;  // retained per chain after thinning
  std::uint64_t seed = 1;
  double accept_low = 0.2;
  double accept_high = 0.9;
};

/// Target exp(-V(phi) - 1/2 <phi, (m^2-Delta) phi>); gradients in the a^2
/// inner product.
struct PotentialTarget {
  std::function<double(const Field&)> value;
  std::function<Field(const Field&)> grad;
};

PotentialTarget gibbs_potential(const LatticeSpec& lat,
                                const InteractionSpec& spec);

struct MCMCResult {
  std::vector<Field> samples;  // merged chain-major, deterministic order
  double acceptance = 0.0;
  double r_hat = 1.0;
  bool acceptance_warning = false;
};

/// Fourier-preconditioned random walk (pCN) or Hamiltonian sampler with the
/// free covariance as mass matrix; the free part mixes in O(1) either way.
MCMCResult mcmc_sample(const LatticeSpec& lat, const PotentialTarget& target,
                       const MCMCConfig& cfg);
MCMCResult mcmc_sample(const LatticeSpec& lat, const InteractionSpec& spec,
                       const MCMCConfig& cfg);

struct Estimate {
  double value = 0.0;
  double se = 0.0;
  double ess = 0.0;
  bool bias_warning = false;
};

/// -log E[e^{-V(W_1)}] over iid GFF draws, delta-method SE, with a bias
/// warning when the weight effective sample size drops below 5%.
Estimate log_partition_mc(const LatticeSpec& lat,
                          const std::function<double(const Field&)>& potential,
                          int n_samples, std::uint64_t seed);
Estimate log_partition_mc(const LatticeSpec& lat, const InteractionSpec& spec,
                          int n_samples, std::uint64_t seed);

/// One-parameter potential family for thermodynamic integration.
struct CouplingFamily {
  std::function<double(const Field&, double)> value;
  std::function<double(const Field&, double)> dvalue;
  std::function<Field(const Field&, double)> grad;
};

CouplingFamily coupling_family(const LatticeSpec& lat,
                               const InteractionSpec& spec);

struct TIEstimate {
  double value = 0.0;
  double se = 0.0;
  bool monotone = true;
  std::vector<double> integrand;  // mean dV/dc at the grid points
};

/// Trapezoid of E_{theta^c}[dV/dc] over the coupling grid (>= 5 points
/// starting at 0).
TIEstimate log_partition_ti(const LatticeSpec& lat, const CouplingFamily& fam,
                            const std::vector<double>& grid,
                            const MCMCConfig& cfg);

/// W^V(f) = -log of the MCMC mean of e^{-f} under theta^V.
Estimate laplace_mc(const LatticeSpec& lat, const InteractionSpec& spec,
                    const Observable& f, const MCMCConfig& cfg);

struct MomentObservable {
  std::string id;
  std::function<double(const Field&)> eval;
};

/// Registered comparison family: site mean, int rho phi^2, two-point at
/// offsets, masked Wick quartic, bump-smeared average.
std::vector<MomentObservable> standard_moment_observables(
    const LatticeSpec& lat, const WeightSpec& rho_w, const Field& mask,
    const std::vector<std::pair<int, int>>& offsets, const Field& bump);

struct MomentRow {
  std::string id;
  double value_a = 0.0, se_a = 0.0;
  double value_b = 0.0, se_b = 0.0;
  double z = 0.0;
};

struct MomentReport {
  std::vector<MomentRow> rows;
  double max_abs_z = 0.0;
};

/// z-scores between two field ensembles; correlated flags switch the SEs
/// to batch means.
MomentReport moment_compare(const std::vector<Field>& a, bool a_correlated,
                            const std::vector<Field>& b, bool b_correlated,
                            const std::vector<MomentObservable>& observables);

struct ExpMomentRow {
  double s = 0.0;
  double p = 0.0;
  double value = 0.0;
  double se = 0.0;
  double ess = 0.0;
  bool overflow = false;
};

/// MC estimate of E[exp(delta ||phi||_{W^{s,p}(rho)}^p)] over an ensemble.
std::vector<ExpMomentRow> exp_moment_probe(
    const LatticeSpec& lat, const std::vector<Field>& ensemble,
    const WeightSpec& w, const std::vector<std::pair<double, double>>& norms,
    double delta);

}  // namespace bdq
