#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bdq/lattice.hpp"
#include "bdq/rng.hpp"

namespace bdq {

/// Uniform grid on [0, 1] with n_steps steps, t_j = j / n_steps.
struct TimeGrid {
  int n_steps = 1;
  double dt() const { return 1.0 / n_steps; }
  double time(int j) const { return static_cast<double>(j) / n_steps; }
};

/// Pointwise variance of the GFF at t = 1: G(0) = (1/l^2) sum_k (m^2+lambda_k)^{-1}.
/// Single source of truth for every Wick constant in the project.
double gff_variance(const LatticeSpec& lat);

/// sigma^2_t = t G(0).
double wick_sigma(const LatticeSpec& lat, double t);

/**
 * One realization of the Brownian martingale W_t = (m^2 - Delta)^{-1/2} X_t
 * on the time grid, together with its Wick-power enhancement. The raw
 * increments of the cylindrical noise X are kept so adaptedness and
 * martingale properties can be probed directly.
 */
class EnhancedGFFPath {
 public:
  EnhancedGFFPath(const LatticeSpec& lat, const TimeGrid& tg,
                  std::vector<Field> x_increments);

  const TimeGrid& grid() const { return tg_; }
  int n_steps() const { return tg_.n_steps; }

  const Field& x_increment(int j) const { return xinc_[j]; }
  /// W at grid time t_j (j = 0 .. n_steps).
  const Field& w(int j) const { return w_[j]; }
  const Field& w1() const { return w_.back(); }

  double sigma2(int j) const;

  Field wick2(int j) const;  // [[W_t^2]] = W^2 - sigma^2_t
  Field wick3(int j) const;  // [[W_t^3]] = W^3 - 3 sigma^2_t W

 private:
  const LatticeSpec* lat_;
  TimeGrid tg_;
  double g0_;
  std::vector<Field> xinc_;
  std::vector<Field> w_;
};

/// Draw sample i of the ensemble. Increments of X are mean-zero Gaussians
/// scaled so that E[<X_1,f><X_1,g>] = <f,g>.
EnhancedGFFPath sample_path(const LatticeSpec& lat, const TimeGrid& tg,
                            const NoiseEnsemble& ens, int sample);

/// Wick powers of W at grid time index j.
std::pair<Field, Field> enhance(const EnhancedGFFPath& path, int j);

/// Lattice Gaussian multiplicative chaos density at t = 1:
/// M^beta(x) = exp(beta W1(x) - beta^2 sigma^2_1 / 2), mean one per site.
/// Supercritical beta^2 >= 8 pi is allowed but flagged on stderr.
Field gmc_density(const LatticeSpec& lat, const Field& w1, double beta);

struct GmcScalingRow {
  double radius = 0.0;      // requested ball radius (physical)
  double radius_eff = 0.0;  // sqrt(area(B)/pi) of the grid ball
  double moment = 0.0;      // E[M(B)^p]^{1/p}
  double se = 0.0;
};

struct GmcScalingReport {
  double slope = 0.0;
  double theory_slope = 0.0;
  std::vector<GmcScalingRow> rows;
};

/// Log-log regression of E[M^beta(B(0,r))^p]^{1/p} against the ball radius,
/// compared to the exponent 2 - (p-1) beta^2 / (4 pi).
GmcScalingReport gmc_scaling_experiment(const LatticeSpec& lat,
                                        const NoiseEnsemble& ens, double beta,
                                        double p,
                                        const std::vector<double>& radii);

struct CovarianceRow {
  std::string name;
  double empirical = 0.0;
  double theory = 0.0;
  double se = 0.0;
  double z = 0.0;
};

struct CovarianceReport {
  std::vector<CovarianceRow> rows;
  double max_abs_z = 0.0;
};

/// Empirical E[W_s(x) W_t(x+r)] against (s ^ t) G(r) at the given offsets,
/// plus the independent-increments check.
CovarianceReport covariance_check(const NoiseEnsemble& ens,
                                  const LatticeSpec& lat, const TimeGrid& tg,
                                  const std::vector<std::pair<int, int>>& offsets);

}  // namespace bdq
