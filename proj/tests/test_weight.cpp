#include <doctest.h>

#include <cmath>

#include "bdq/rng.hpp"
#include "bdq/weight.hpp"

using namespace bdq;

TEST_CASE("flat weight reports exactly zero") {
  const LatticeSpec lat = make_lattice(16, 0.5, 1.0);
  WeightSpec w;
  w.gamma = 0.0;
  const WeightReport rep = validate_weight(w, 0.1, lat);
  CHECK(rep.max_ratio == 0.0);
  CHECK(rep.commutator_ratio == 0.0);
  CHECK(rep.pass);
}

TEST_CASE("admissibility ratio grows with gamma") {
  const LatticeSpec lat = make_lattice(32, 0.25, 1.0);
  double prev = 0.0;
  for (double gamma : {1.0, 4.0, 16.0}) {
    WeightSpec w;
    w.gamma = gamma;
    w.center_i = 16;
    w.center_j = 16;
    const WeightReport rep = validate_weight(w, 0.5, lat);
    CHECK(rep.max_ratio > prev);
    prev = rep.max_ratio;
  }
}

TEST_CASE("validate_weight example configuration") {
  const LatticeSpec lat = make_lattice(64, 0.25, 1.0);
  WeightSpec w;
  w.gamma = 16.0;
  w.center_i = 32;
  w.center_j = 32;
  const WeightReport rep = validate_weight(w, 0.5, lat);
  CHECK(rep.max_ratio > 0.0);
  CHECK(std::isfinite(rep.commutator_ratio));
}

TEST_CASE("sobolev norm basics") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  WeightSpec w;
  w.gamma = 1.0;
  w.alpha = 0.0;
  const Field zero = Field::Zero(8, 8);
  CHECK(weighted_sobolev_norm(lat, zero, w, 0.7, 3.0) == 0.0);

  const Field f = standard_normal_field(lat, 5, 0);
  // s=0, alpha=0, p=2 is the plain L2 norm.
  CHECK(weighted_sobolev_norm(lat, f, w, 0.0, 2.0) ==
        doctest::Approx(lp_norm(lat, f, 2.0)).epsilon(1e-12));
  // Homogeneity.
  CHECK(weighted_sobolev_norm(lat, 2.0 * f, w, -0.3, 4.0) ==
        doctest::Approx(2.0 * weighted_sobolev_norm(lat, f, w, -0.3, 4.0))
            .epsilon(1e-12));
}

TEST_CASE("besov norm on single-shell fields and L2 comparability") {
  const LatticeSpec lat = make_lattice(16, 0.5, 1.0);
  WeightSpec w;
  w.gamma = 0.0;
  w.alpha = 0.0;

  const Field zero = Field::Zero(16, 16);
  CHECK(besov_norm(lat, zero, w, 1.2, 2.0, 2.0) == 0.0);

  // A field concentrated on one shell keeps a single term.
  const Field noise = standard_normal_field(lat, 9, 0);
  const int shell = 2;
  const Field single = besov_shell_project(lat, noise, shell);
  const double s = 0.8, p = 2.0;
  const double expect = std::pow(2.0, shell * s) * lp_norm(lat, single, p);
  CHECK(besov_norm(lat, single, w, s, p, 2.0) ==
        doctest::Approx(expect).epsilon(1e-10));

  // Sharp shells make B^0_{2,2} equal to L2; stay well within the C <= 3 band.
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Field f = standard_normal_field(lat, 100 + i, 0);
    const double ratio = besov_norm(lat, f, w, 0.0, 2.0, 2.0) / lp_norm(lat, f, 2.0);
    worst = std::max(worst, std::max(ratio, 1.0 / ratio));
  }
  CHECK(worst <= 3.0);
  CHECK(worst == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("shell table is a partition") {
  const LatticeSpec lat = make_lattice(32, 1.0, 1.0);
  const Field f = standard_normal_field(lat, 42, 0);
  Field sum = Field::Zero(32, 32);
  const Eigen::ArrayXXi table = besov_shell_table(lat);
  for (int shell = -1; shell <= table.maxCoeff(); ++shell) {
    sum += besov_shell_project(lat, f, shell);
  }
  CHECK((sum - f).abs().maxCoeff() < 1e-10);
}
