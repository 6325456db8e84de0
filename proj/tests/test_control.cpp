#include <doctest.h>

#include <cmath>

#include "bdq/control.hpp"
#include "bdq/oracles.hpp"
#include "bdq/stats.hpp"

using namespace bdq;

namespace {

const LatticeSpec& lat8() {
  static const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  return lat;
}

Field smooth_random(std::uint64_t seed, int idx) {
  return apply_spectral(lat8(), -1.0, standard_normal_field(lat8(), seed, idx));
}

std::vector<Field> constant_rate_path(const TimeGrid& tg, const Field& phi) {
  std::vector<Field> z;
  for (int j = 0; j <= tg.n_steps; ++j) z.push_back(tg.time(j) * phi);
  return z;
}

DriftParameters random_theta(const std::vector<FeatureKind>& feats, int n_steps,
                             double scale, std::uint64_t seed) {
  DriftParameters theta = DriftParameters::zero(feats, n_steps);
  for (int j = 0; j < theta.n_steps(); ++j) {
    for (int f = 0; f < theta.n_features(); ++f) {
      theta.coeffs(j, f) = scale * normal_variate(seed, j, f, 0);
    }
  }
  return theta;
}

}  // namespace

TEST_CASE("path energy of simple drifts") {
  const TimeGrid tg{8};
  const Field phi = smooth_random(1, 0);

  std::vector<Field> zero(9, Field::Zero(8, 8));
  CHECK(path_energy(lat8(), tg, zero) == 0.0);

  // Constant rate: E = 1/2 <phi, (m^2-Delta) phi>, exact for the piecewise
  // linear interpolation.
  const double expected =
      0.5 * inner_product(lat8(), phi, apply_spectral(lat8(), 1.0, phi));
  CHECK(path_energy(lat8(), tg, constant_rate_path(tg, phi)) ==
        doctest::Approx(expected).epsilon(1e-12));

  // All mass in one step costs n_t times the constant-rate energy.
  std::vector<Field> jump(9, phi);
  for (int j = 0; j <= 2; ++j) jump[j] = Field::Zero(8, 8);
  CHECK(path_energy(lat8(), tg, jump) ==
        doctest::Approx(8.0 * expected).epsilon(1e-12));
}

TEST_CASE("bilinear energy identities") {
  const TimeGrid tg{4};
  const Field phi = smooth_random(2, 0);
  const Field psi = smooth_random(2, 1);
  const auto z = constant_rate_path(tg, phi);
  const auto k = constant_rate_path(tg, psi);

  CHECK(bilinear_energy(lat8(), tg, z, z) ==
        doctest::Approx(path_energy(lat8(), tg, z)).epsilon(1e-12));
  std::vector<Field> zerok(5, Field::Zero(8, 8));
  CHECK(bilinear_energy(lat8(), tg, z, zerok) == 0.0);
  CHECK(bilinear_energy(lat8(), tg, z, k) ==
        doctest::Approx(bilinear_energy(lat8(), tg, k, z)).epsilon(1e-12));

  // Additivity to 1e-10 relative.
  std::vector<Field> sum(5);
  for (int j = 0; j <= 4; ++j) sum[j] = z[j] + k[j];
  const double lhs = path_energy(lat8(), tg, sum);
  const double rhs = path_energy(lat8(), tg, z) + path_energy(lat8(), tg, k) +
                     2.0 * bilinear_energy(lat8(), tg, z, k);
  CHECK(close_rel(lhs, rhs, 1e-10));
}

TEST_CASE("zero drift gives zero objective for the free problem") {
  const TimeGrid tg{4};
  const NoiseEnsemble ens(3, 64);
  const InteractionSpec inter = make_free_interaction(lat8());
  const Observable f = Observable::zero();
  const ControlledEnsemble ce(lat8(), tg, ens, inter, f);
  const DriftParameters theta =
      DriftParameters::zero(feature_library(inter, f), 4);
  const ObjectiveEstimate est = objective(ce, theta);
  CHECK(est.value == 0.0);
  CHECK(est.se == 0.0);
}

TEST_CASE("reverse gradient matches coefficientwise finite differences") {
  const TimeGrid tg{4};
  const NoiseEnsemble ens(5, 40);
  const InteractionSpec inter = make_phi4(lat8(), 0.4, full_mask(lat8()));
  const Observable f = Observable::linear(bump_field(lat8(), 1.2, 1.0, 4, 4));
  const ControlledEnsemble ce(lat8(), tg, ens, inter, f);
  const DriftParameters theta =
      random_theta(feature_library(inter, f), 4, 0.05, 99);

  const Eigen::MatrixXd rev =
      objective_gradient(ce, theta, GradientMode::reverse);
  const Eigen::MatrixXd fd =
      objective_gradient(ce, theta, GradientMode::finite_difference, 1e-5);
  CHECK((rev - fd).norm() <= 1e-6 * std::max(rev.norm(), fd.norm()));
}

TEST_CASE("reverse gradient for the exponential model") {
  const TimeGrid tg{4};
  const NoiseEnsemble ens(6, 40);
  const InteractionSpec inter =
      make_exponential(lat8(), 1.0, 1.5, bump_field(lat8(), 1.5, 1.0, 4, 4));
  const Observable f = Observable::zero();
  const ControlledEnsemble ce(lat8(), tg, ens, inter, f);
  const DriftParameters theta =
      random_theta(feature_library(inter, f), 4, 0.05, 77);

  const Eigen::MatrixXd rev =
      objective_gradient(ce, theta, GradientMode::reverse);
  const Eigen::MatrixXd fd =
      objective_gradient(ce, theta, GradientMode::finite_difference, 1e-5);
  CHECK((rev - fd).norm() <= 1e-6 * std::max(rev.norm(), fd.norm()));
}

TEST_CASE("quadratic gaussian problem recovers the closed form") {
  const TimeGrid tg{8};
  const int n = 2000;
  const NoiseEnsemble ens(7, n);
  const InteractionSpec inter = make_free_interaction(lat8());
  const Field ell = bump_field(lat8(), 1.4, 1.0, 4, 4);
  const Observable f = Observable::linear(ell);
  const ControlledEnsemble ce(lat8(), tg, ens, inter, f);

  const double closed =
      -0.5 * inner_product(lat8(), ell, apply_spectral(lat8(), -1.0, ell));

  // The analytic optimum lies in the ansatz: unit coefficient on grad f.
  const std::vector<FeatureKind> feats = feature_library(inter, f);
  DriftParameters exact = DriftParameters::zero(feats, 8);
  for (int j = 0; j < 8; ++j) {
    for (int fi = 0; fi < static_cast<int>(feats.size()); ++fi) {
      if (feats[fi] == FeatureKind::GradF) exact.coeffs(j, fi) = 1.0;
    }
  }
  // Deterministic part of the objective hits the closed form to 1e-9.
  const SampleRecord rec = ce.simulate(exact, 0);
  const EnhancedGFFPath path = sample_path(lat8(), tg, ens, 0);
  const double deterministic =
      rec.objective - inner_product(lat8(), ell, path.w1());
  CHECK(close_rel(deterministic, closed, 1e-9));

  // The optimizer reaches the same value within noise.
  OptConfig oc;
  oc.iterations = 120;
  const OptResult res = optimize(ce, DriftParameters::zero(feats, 8), oc);
  CHECK(res.improved);
  const double final_obj = res.trace.back().objective;
  const double final_se = res.trace.back().se;
  CHECK(std::abs(final_obj - closed) <= 2.0 * final_se);

  // Gateaux derivative vanishes at the optimum for deterministic controls.
  const TestControl bump = bump_control(lat8(), 1.0);
  const ValueSE g = gateaux(ce, exact, bump);
  CHECK(std::abs(g.value) <= 1e-9);
}

TEST_CASE("optimizer trace never increases under CRN") {
  const TimeGrid tg{4};
  const NoiseEnsemble ens(8, 200);
  const InteractionSpec inter = make_phi4(lat8(), 0.5, full_mask(lat8()));
  const Observable f = Observable::zero();
  const ControlledEnsemble ce(lat8(), tg, ens, inter, f);
  OptConfig oc;
  oc.iterations = 40;
  const OptResult res =
      optimize(ce, DriftParameters::zero(feature_library(inter, f), 4), oc);
  for (std::size_t i = 1; i < res.trace.size(); ++i) {
    CHECK(res.trace[i].objective <= res.trace[i - 1].objective + 1e-12);
  }
  CHECK(res.improved);
}

TEST_CASE("gateaux derivative matches the CRN finite difference") {
  const TimeGrid tg{4};
  const NoiseEnsemble ens(9, 150);
  const InteractionSpec inter = make_phi4(lat8(), 0.5, full_mask(lat8()));
  const Observable f = Observable::linear(bump_field(lat8(), 1.2, 0.5, 4, 4));
  const ControlledEnsemble ce(lat8(), tg, ens, inter, f);
  const DriftParameters theta =
      random_theta(feature_library(inter, f), 4, 0.03, 11);

  WeightSpec w;
  w.gamma = 1.0;
  w.center_i = 4;
  w.center_j = 4;
  for (const TestControl& tc : standard_test_controls(lat8(), w)) {
    const ValueSE g = gateaux(ce, theta, tc);
    const ValueSE fd = gateaux_fd(ce, theta, tc, 1e-3);
    CHECK(close_rel(g.value, fd.value, 1e-4, 1e-8));
  }

  // Linearity in K: doubling an explicit path doubles the derivative.
  const Field b = bump_field(lat8(), 1.0, 1.0, 4, 4);
  std::vector<Field> kp, kp2;
  for (int j = 0; j <= 4; ++j) {
    kp.push_back(tg.time(j) * b);
    kp2.push_back(2.0 * tg.time(j) * b);
  }
  const ValueSE g1 = gateaux(ce, theta, explicit_control(kp, "k"));
  const ValueSE g2 = gateaux(ce, theta, explicit_control(kp2, "2k"));
  CHECK(close_rel(g2.value, 2.0 * g1.value, 1e-10));
}

TEST_CASE("adaptedness: permuting future noise leaves earlier drift intact") {
  const TimeGrid tg{6};
  const NoiseEnsemble ens(12, 4);
  const InteractionSpec inter = make_phi4(lat8(), 0.5, full_mask(lat8()));
  const Observable f = Observable::zero();
  const ControlledEnsemble ce(lat8(), tg, ens, inter, f);
  const DriftParameters theta =
      random_theta(feature_library(inter, f), 6, 0.05, 13);

  const EnhancedGFFPath base = sample_path(lat8(), tg, ens, 0);
  std::vector<Field> inc;
  for (int j = 0; j < 6; ++j) inc.push_back(base.x_increment(j));
  std::swap(inc[4], inc[5]);
  const EnhancedGFFPath permuted(lat8(), tg, inc);

  const SampleRecord a = ce.simulate(theta, base);
  const SampleRecord b = ce.simulate(theta, permuted);
  for (int j = 0; j <= 4; ++j) {
    CHECK((a.z[j] == b.z[j]).all());
  }
  CHECK_FALSE((a.z[6] == b.z[6]).all());
}

TEST_CASE("upper bound property against the direct oracle") {
  const TimeGrid tg{8};
  const NoiseEnsemble ens(14, 2000);
  const InteractionSpec inter = make_phi4(lat8(), 0.5, full_mask(lat8()));
  const Observable f = Observable::zero();
  const ControlledEnsemble ce(lat8(), tg, ens, inter, f);

  const Estimate oracle = log_partition_mc(lat8(), inter, 20000, 999);
  const std::vector<FeatureKind> feats = feature_library(inter, f);
  for (int trial = 0; trial < 4; ++trial) {
    const DriftParameters theta = random_theta(feats, 8, 0.02 * trial, 15 + trial);
    const ObjectiveEstimate est = objective(ce, theta);
    const double tol = 3.0 * std::sqrt(est.se * est.se + oracle.se * oracle.se);
    CHECK(est.value >= oracle.value - tol);
  }
}

TEST_CASE("el residual vanishes at the optimum and detects criticality") {
  const TimeGrid tg{8};
  const NoiseEnsemble ens(16, 1500);
  const InteractionSpec inter = make_phi4(lat8(), 0.5, full_mask(lat8()));
  const Observable f = Observable::zero();
  const ControlledEnsemble ce(lat8(), tg, ens, inter, f);
  OptConfig oc;
  oc.iterations = 100;
  const OptResult res =
      optimize(ce, DriftParameters::zero(feature_library(inter, f), 8), oc);

  WeightSpec w;
  w.gamma = 1.0;
  w.center_i = 4;
  w.center_j = 4;
  for (const TestControl& tc : standard_test_controls(lat8(), w)) {
    const ValueSE r = el_residual(ce, res.theta, tc);
    CHECK(std::abs(r.value) <= 3.0 * r.se);
  }

  // At theta = 0 the feedback probe sees a nonzero residual.
  const DriftParameters theta0 =
      DriftParameters::zero(feature_library(inter, f), 8);
  const ValueSE r0 = el_residual(ce, theta0, grad_probe_control(1.0));
  CHECK(std::abs(r0.value) > 3.0 * r0.se);
}

TEST_CASE("apriori bound reduces to zero at zero coupling") {
  const TimeGrid tg{4};
  const NoiseEnsemble ens(17, 100);
  const InteractionSpec inter = make_phi4(lat8(), 0.0, full_mask(lat8()));
  const Observable f = Observable::zero();
  const ControlledEnsemble ce(lat8(), tg, ens, inter, f);
  const DriftParameters theta0 =
      DriftParameters::zero(feature_library(inter, f), 4);
  WeightSpec w;
  w.gamma = 2.0;
  w.center_i = 4;
  w.center_j = 4;
  const AprioriReport rep = apriori_bound(ce, theta0, w);
  CHECK(rep.lhs == 0.0);

  // Flat weight on the torus: the commutator term vanishes identically.
  const DriftParameters theta = random_theta(theta0.features, 4, 0.05, 18);
  WeightSpec flat;
  flat.gamma = 0.0;
  const AprioriReport flat_rep = apriori_bound(ce, theta, flat);
  CHECK(std::abs(flat_rep.rhs_terms.at("commutator")) < 1e-10);
}

TEST_CASE("sign diagnostic rejects the wrong interaction") {
  const TimeGrid tg{4};
  const NoiseEnsemble ens(19, 16);
  const InteractionSpec inter = make_phi4(lat8(), 0.5, full_mask(lat8()));
  const ControlledEnsemble ce(lat8(), tg, ens, inter, Observable::zero());
  const DriftParameters theta0 =
      DriftParameters::zero(feature_library(inter, Observable::zero()), 4);
  CHECK_THROWS_AS(sign_diagnostic_exp(ce, theta0), std::invalid_argument);
}

TEST_CASE("frozen random control needs at least two steps") {
  const TimeGrid tg{1};
  const NoiseEnsemble ens(20, 4);
  const InteractionSpec inter = make_free_interaction(lat8());
  const ControlledEnsemble ce(lat8(), tg, ens, inter, Observable::zero());
  const DriftParameters theta0 =
      DriftParameters::zero(feature_library(inter, Observable::zero()), 1);
  CHECK_THROWS_AS(gateaux(ce, theta0, frozen_random_control()),
                  std::invalid_argument);
}
