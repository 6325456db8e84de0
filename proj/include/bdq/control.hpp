#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bdq/gff.hpp"
#include "bdq/interaction.hpp"
#include "bdq/observable.hpp"
#include "bdq/weight.hpp"

namespace bdq {

/// Feature fields of the adapted feedback drift. The drift increment is
///   Zdot_j = -(m^2-Delta)^{-1} sum_f c_{j,f} Phi_f(state at t_j),
/// with the feature library copied from the Euler-Lagrange integrand.
enum class FeatureKind { Wick3, Wick2Z, WZ2, Z3, Z, Const, GradF, ExpShamov };

std::string feature_name(FeatureKind k);

std::vector<FeatureKind> feature_library(const InteractionSpec& spec,
                                         const Observable& f);

/// Per-step, per-feature coefficients of the drift ansatz.
struct DriftParameters {
  std::vector<FeatureKind> features;
  Eigen::MatrixXd coeffs;  // n_steps x n_features

  static DriftParameters zero(std::vector<FeatureKind> feats, int n_steps);
  int n_steps() const { return static_cast<int>(coeffs.rows()); }
  int n_features() const { return static_cast<int>(coeffs.cols()); }
};

/// One simulated sample: the drift path and the objective pieces.
struct SampleRecord {
  std::vector<Field> z;  // n_steps + 1 entries, z[0] = 0
  Field y1;              // hbar^{1/2} W_1 + Z_1
  double f_value = 0.0;
  double v_value = 0.0;
  double energy = 0.0;
  double objective = 0.0;
};

/// Energy E(Z) = 1/2 sum_j dt || (m^2-Delta)^{1/2} Zdot_j ||_L2^2 of a
/// piecewise-linear path, and the associated bilinear form.
double path_energy(const LatticeSpec& lat, const TimeGrid& tg,
                   const std::vector<Field>& zpath);
double bilinear_energy(const LatticeSpec& lat, const TimeGrid& tg,
                       const std::vector<Field>& zpath,
                       const std::vector<Field>& kpath);

/**
 * Shared-noise ensemble of controlled paths: every sample is a pure
 * function of (seed, index, theta), so common random numbers across
 * parameter values are exact.
 */
class ControlledEnsemble {
 public:
  ControlledEnsemble(const LatticeSpec& lat, const TimeGrid& tg,
                     const NoiseEnsemble& ens, const InteractionSpec& inter,
                     const Observable& f);

  const LatticeSpec& lattice() const { return *lat_; }
  const TimeGrid& grid() const { return tg_; }
  const NoiseEnsemble& noise() const { return ens_; }
  const InteractionSpec& interaction() const { return inter_; }
  const Observable& observable() const { return obs_; }
  int n_samples() const { return ens_.n_samples(); }

  SampleRecord simulate(const DriftParameters& theta, int sample) const;
  SampleRecord simulate(const DriftParameters& theta,
                        const EnhancedGFFPath& path) const;

  /// Reverse accumulation through the time-stepping recursion; exact for
  /// the discretized objective.
  SampleRecord simulate_with_grad(const DriftParameters& theta, int sample,
                                  Eigen::MatrixXd& grad) const;

  /// Effective terminal potential V(W-path, z1) for this interaction.
  double terminal_potential(const EnhancedGFFPath& path, const Field& z1) const;
  Field terminal_potential_grad(const EnhancedGFFPath& path,
                                const Field& z1) const;

 private:
  const LatticeSpec* lat_;
  TimeGrid tg_;
  NoiseEnsemble ens_;
  InteractionSpec inter_;
  Observable obs_;
};

struct ValueSE {
  double value = 0.0;
  double se = 0.0;
};

struct ObjectiveEstimate {
  double value = 0.0;
  double se = 0.0;
  std::vector<double> per_sample;
};

/// MC estimate of E[f(W+Z) + V(W+Z) + E(Z)] over the ensemble.
ObjectiveEstimate objective(const ControlledEnsemble& ce,
                            const DriftParameters& theta);

enum class GradientMode { reverse, finite_difference };

struct OptConfig {
  int iterations = 150;
  double step = 10.0;
  double decay = 0.995;
  GradientMode mode = GradientMode::reverse;
  double grad_tol = 0.0;  // 0 disables the gradient stopping rule
  double fd_step = 1e-4;
};

struct OptTraceRow {
  int iteration = 0;
  double objective = 0.0;
  double se = 0.0;
  double grad_norm = 0.0;
  double step_size = 0.0;
};

struct OptResult {
  DriftParameters theta;
  std::vector<OptTraceRow> trace;
  bool improved = false;
  bool grad_converged = false;
};

/// Full-batch gradient descent with geometric step decay on the fixed
/// ensemble (CRN). Aborts after 50 consecutive objective increases.
OptResult optimize(const ControlledEnsemble& ce, const DriftParameters& theta0,
                   const OptConfig& cfg);

/// Ensemble gradient of the objective with respect to the coefficients.
Eigen::MatrixXd objective_gradient(const ControlledEnsemble& ce,
                                   const DriftParameters& theta,
                                   GradientMode mode, double fd_step = 1e-4);

struct OptimizedValue {
  DriftParameters theta;
  double value = 0.0;
  double se = 0.0;
  std::vector<OptTraceRow> trace;
};

/// Build the feature library, optimize from theta = 0, and evaluate the
/// final objective on the same ensemble.
OptimizedValue solve_bd(const LatticeSpec& lat, const TimeGrid& tg,
                        const NoiseEnsemble& ens, const InteractionSpec& inter,
                        const Observable& f, const OptConfig& cfg);

/// Per-sample difference of two objectives on shared noise (CRN).
ValueSE paired_difference(const ControlledEnsemble& a,
                          const DriftParameters& theta_a,
                          const ControlledEnsemble& b,
                          const DriftParameters& theta_b);

/// Adapted test controls K for the Euler-Lagrange probes.
struct TestControl {
  enum class Kind {
    bump,           // deterministic K_t = t * profile
    frozen_random,  // per-sample smooth field frozen after the first step
    rho_z,          // K_t = rho Z_t
    grad_probe,     // feedback along minus the potential gradient source
    explicit_path,  // user-supplied deterministic path
  };
  Kind kind = Kind::bump;
  std::string name = "bump";
  Field profile;                    // bump profile
  WeightSpec weight;                // rho for rho_z
  double eta = 1.0;                 // grad_probe magnitude
  std::vector<Field> path;          // explicit_path
};

TestControl bump_control(const LatticeSpec& lat, double radius,
                         double height = 1.0);
TestControl frozen_random_control();
TestControl rho_z_control(const WeightSpec& w);
TestControl grad_probe_control(double eta = 1.0);
TestControl explicit_control(std::vector<Field> path, std::string name);

/// Registered family used by the acceptance experiments.
std::vector<TestControl> standard_test_controls(const LatticeSpec& lat,
                                                const WeightSpec& w);

/// Per-sample control path K_0..K_{n_t} for the given sample state.
std::vector<Field> control_path(const ControlledEnsemble& ce,
                                const DriftParameters& theta,
                                const EnhancedGFFPath& path,
                                const SampleRecord& rec, const TestControl& tc);

/// Gateaux derivative E[grad G(W+Z).K + 2 E(Z,K)] of the objective in the
/// direction of the control.
ValueSE gateaux(const ControlledEnsemble& ce, const DriftParameters& theta,
                const TestControl& tc);

/// Same functional as gateaux, exposed as the Euler-Lagrange residual. An
/// optional weight applies H = rho^{-2N} K before pairing.
ValueSE el_residual(const ControlledEnsemble& ce, const DriftParameters& theta,
                    const TestControl& tc,
                    std::optional<std::pair<WeightSpec, double>> decay_weight =
                        std::nullopt);

/// Central-difference check of the gateaux derivative under CRN.
ValueSE gateaux_fd(const ControlledEnsemble& ce, const DriftParameters& theta,
                   const TestControl& tc, double sigma = 1e-3);

/// Second-order diagnostic: grad^2 F(theta)(K, K).
ValueSE second_variation(const ControlledEnsemble& ce,
                         const DriftParameters& theta, const TestControl& tc);

struct AprioriReport {
  double lhs = 0.0;
  double lhs_se = 0.0;
  std::map<std::string, double> rhs_terms;
  double ratio = 0.0;  // lhs / (1 + sum |rhs|)
};

/// The weighted bound quantity E[2 lambda int rho Z^4 + E(rho^{1/2} Z)]
/// with the commutator and noise terms obtained by testing K = rho Z.
AprioriReport apriori_bound(const ControlledEnsemble& ce,
                            const DriftParameters& theta, const WeightSpec& w);

struct SignReport {
  double mean_site_mean = 0.0;
  double se_site_mean = 0.0;
  double mean_z1_max = 0.0;
  double frac_positive = 0.0;
  bool pass = false;
};

/// Sign structure of the optimal exponential-model drift (Z <= 0).
SignReport sign_diagnostic_exp(const ControlledEnsemble& ce,
                               const DriftParameters& theta,
                               double tol = 1e-9);

}  // namespace bdq
