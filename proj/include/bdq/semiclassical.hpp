#pragma once

#include <cstdint>
#include <functional>

#include "bdq/interaction.hpp"
#include "bdq/observable.hpp"

namespace bdq {

struct MinimizeResult {
  Field phi;
  double value = 0.0;
  double el_residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective per accepted step
};

/// Preconditioned gradient descent with backtracking on
/// phi -> f(phi) + J(phi); terminates when
/// || grad f + 4 lambda phi^3 + (m^2-Delta) phi ||_L2 < tol.
MinimizeResult deterministic_minimize(const LatticeSpec& lat,
                                      const Observable& f,
                                      const InteractionSpec& spec, double tol,
                                      const Field& start, int max_iter = 5000);
MinimizeResult deterministic_minimize(const LatticeSpec& lat,
                                      const Observable& f,
                                      const InteractionSpec& spec, double tol);

/// lambda = 0 oracle: conjugate-gradient solve of
/// (grad^2 f + (m^2-Delta)) phi = grad^2 f phi_hat.
Field gaussian_minimizer_solve(const LatticeSpec& lat, const Observable& f,
                               double tol = 1e-12);

/// Dense matrix of a linear field operator, for small-lattice closed forms.
Eigen::MatrixXd dense_operator(const LatticeSpec& lat,
                               const std::function<Field(const Field&)>& op);

/// Closed-form W^hbar(f) for the Gaussian case (lambda = 0, quadratic f):
/// log-determinant plus quadratic terms, exact on the lattice.
double gaussian_hbar_closed_form(const LatticeSpec& lat, const Observable& f,
                                 double hbar);

struct HbarRow {
  double hbar = 0.0;
  double w_value = 0.0;
  double se = 0.0;
  double ess = 0.0;
  double gap = 0.0;  // |w_value - deterministic_value|
};

struct HbarSweepReport {
  std::vector<HbarRow> rows;
  double deterministic_value = 0.0;
  Field phi_star;
  bool gaps_decreasing = false;
};

/// W^hbar(f) = hbar (A_{f+V} - A_V) with A_G = -log E_{theta^hbar} e^{-G/hbar},
/// estimated by importance sampling re-centered at the deterministic
/// minimizer (exact Cameron-Martin shift at finite lattice), against
/// the hbar -> 0 value inf(f + J).
HbarSweepReport hbar_sweep(const LatticeSpec& lat, const Observable& f,
                           const InteractionSpec& spec,
                           const std::vector<double>& hbar_list, int n_samples,
                           std::uint64_t seed, double tol = 1e-9);

struct DerivChainRow {
  double hbar = 0.0;
  double alpha = 0.0;
  double dw_dalpha = 0.0;
  double se = 0.0;
  double f_at_phi = 0.0;  // f(phi^{alpha f})
  double gap = 0.0;
};

struct DerivChainReport {
  std::vector<DerivChainRow> rows;
  bool gaps_shrinking = true;  // per alpha, |gap| decreasing along hbar_list
};

/// Finite-difference d/dalpha of W^hbar(alpha f) against f(phi^{alpha f}).
DerivChainReport semiclassical_derivative_chain(
    const LatticeSpec& lat, const Observable& f, const InteractionSpec& spec,
    const std::vector<double>& alpha_list, const std::vector<double>& hbar_list,
    int n_samples, std::uint64_t seed, double fd_delta = 0.05);

}  // namespace bdq
