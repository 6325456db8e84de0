#include "bdq/observable.hpp"

#include <stdexcept>

namespace bdq {

Observable Observable::zero() { return Observable{}; }

Observable Observable::linear(Field l) {
  Observable o;
  o.kind_ = Kind::linear;
  o.profile_ = std::move(l);
  return o;
}

Observable Observable::quadratic(double c, Field phi_hat, WeightSpec w) {
  if (c < 0.0) throw std::invalid_argument("quadratic observable needs C >= 0");
  Observable o;
  o.kind_ = Kind::quadratic;
  o.c_ = c;
  o.profile_ = std::move(phi_hat);
  o.w_ = w;
  return o;
}

Observable Observable::scaled(double alpha) const {
  Observable o = *this;
  o.scale_ = scale_ * alpha;
  return o;
}

namespace {

// (1 - Delta)^{-1/2} as the multiplier (1 + lambda_k)^{-1/2}.
Field smooth_half(const LatticeSpec& lat, const Field& f) {
  const Eigen::ArrayXXd mult = (1.0 + lat.mode_eigenvalues()).pow(-0.5);
  return apply_mode_multiplier(lat, mult, f);
}

}  // namespace

double Observable::value(const LatticeSpec& lat, const Field& phi) const {
  switch (kind_) {
    case Kind::zero:
      return 0.0;
    case Kind::linear:
      return scale_ * inner_product(lat, profile_, phi);
    case Kind::quadratic: {
      const Field d = smooth_half(lat, phi - profile_);
      const Field rho = rho_field(w_, lat);
      return scale_ * c_ * lat.cell_area() * (rho * d.square()).sum();
    }
  }
  return 0.0;
}

Field Observable::gradient(const LatticeSpec& lat, const Field& phi) const {
  switch (kind_) {
    case Kind::zero:
      return Field::Zero(lat.size(), lat.size());
    case Kind::linear:
      return scale_ * profile_;
    case Kind::quadratic: {
      const Field d = smooth_half(lat, phi - profile_);
      const Field rho = rho_field(w_, lat);
      return scale_ * 2.0 * c_ * smooth_half(lat, rho * d);
    }
  }
  return Field::Zero(lat.size(), lat.size());
}

Field Observable::hessian_apply(const LatticeSpec& lat, const Field& v) const {
  switch (kind_) {
    case Kind::zero:
    case Kind::linear:
      return Field::Zero(lat.size(), lat.size());
    case Kind::quadratic: {
      const Field rho = rho_field(w_, lat);
      return scale_ * 2.0 * c_ * smooth_half(lat, rho * smooth_half(lat, v));
    }
  }
  return Field::Zero(lat.size(), lat.size());
}

}  // namespace bdq
