#pragma once

#include "bdq/lattice.hpp"
#include "bdq/weight.hpp"

namespace bdq {

/**
 * Registered observable family for the variational problems: zero, linear
 * pairings f = <l, .>, and the weighted quadratic
 *
 *   f(psi) = C a^2 sum_x rho(x) ((1-Delta)^{-1/2}(psi - phi_hat))^2(x),
 *
 * with (1-Delta)^{-1/2} the multiplier (1 + lambda_k)^{-1/2}. All gradients
 * are taken in the a^2 inner product. `scale` is the alpha of alpha*f sweeps.
 */
class Observable {
 public:
  enum class Kind { zero, linear, quadratic };

  static Observable zero();
  static Observable linear(Field l);
  static Observable quadratic(double c, Field phi_hat, WeightSpec w);

  Kind kind() const { return kind_; }
  bool is_zero() const { return kind_ == Kind::zero || scale_ == 0.0; }
  double scale() const { return scale_; }
  Observable scaled(double alpha) const;

  double value(const LatticeSpec& lat, const Field& phi) const;
  Field gradient(const LatticeSpec& lat, const Field& phi) const;
  /// Hessian applied to a direction (state-independent for this family).
  Field hessian_apply(const LatticeSpec& lat, const Field& v) const;

  const Field& linear_profile() const { return profile_; }
  double quadratic_c() const { return c_; }
  const Field& quadratic_target() const { return profile_; }

 private:
  Kind kind_ = Kind::zero;
  double scale_ = 1.0;
  Field profile_;   // l for linear, phi_hat for quadratic
  double c_ = 0.0;  // quadratic prefactor
  WeightSpec w_;
};

}  // namespace bdq
