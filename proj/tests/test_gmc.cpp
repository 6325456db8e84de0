#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bdq/gff.hpp"
#include "bdq/stats.hpp"

using namespace bdq;

TEST_CASE("beta zero gives the unit density") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  const NoiseEnsemble ens(1, 4);
  const Field w1 = sample_path(lat, TimeGrid{1}, ens, 0).w1();
  const Field m = gmc_density(lat, w1, 0.0);
  CHECK((m - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("gmc rejects non-finite fields and stays positive") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  Field bad = Field::Zero(8, 8);
  bad(3, 3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(gmc_density(lat, bad, 1.0), std::invalid_argument);

  const NoiseEnsemble ens(7, 64);
  for (int i = 0; i < 64; ++i) {
    const Field m =
        gmc_density(lat, sample_path(lat, TimeGrid{1}, ens, i).w1(), 2.0);
    CHECK((m > 0.0).all());
  }
}

TEST_CASE("mean mass of a grid ball equals its area") {
  const LatticeSpec lat = make_lattice(16, 0.25, 1.0);
  const double beta = std::sqrt(2.0 * std::numbers::pi);
  const int n = 10000;
  const NoiseEnsemble ens(909, n);
  // Ball of radius 0.8 around the origin.
  std::vector<int> idx;
  for (int j = 0; j < 16; ++j) {
    for (int i = 0; i < 16; ++i) {
      if (lat.periodic_dist2(i, j, 0, 0) < 0.64) idx.push_back(i + 16 * j);
    }
  }
  const double area = lat.cell_area() * idx.size();
  std::vector<double> mass(n);
  for (int s = 0; s < n; ++s) {
    const Field m =
        gmc_density(lat, sample_path(lat, TimeGrid{1}, ens, s).w1(), beta);
    double acc = 0.0;
    for (int k : idx) acc += m.data()[k];
    mass[s] = lat.cell_area() * acc;
  }
  const MeanSE ms = mean_se(mass);
  CHECK(std::abs(ms.mean - area) <= 3.0 * ms.se);
}

TEST_CASE("second moment matches the green function double sum") {
  const LatticeSpec lat = make_lattice(16, 0.25, 1.0);
  const double beta2 = 2.0 * std::numbers::pi;
  const double beta = std::sqrt(beta2);
  const int n = 10000;
  const NoiseEnsemble ens(911, n);
  const Field green = green_function(lat);

  std::vector<int> ix, iy;
  for (int j = 0; j < 16; ++j) {
    for (int i = 0; i < 16; ++i) {
      if (lat.periodic_dist2(i, j, 0, 0) < 0.64) {
        ix.push_back(i);
        iy.push_back(j);
      }
    }
  }
  double theory = 0.0;
  for (std::size_t a = 0; a < ix.size(); ++a) {
    for (std::size_t b = 0; b < ix.size(); ++b) {
      const int di = (ix[b] - ix[a] + 16) % 16;
      const int dj = (iy[b] - iy[a] + 16) % 16;
      theory += std::exp(beta2 * green(di, dj));
    }
  }
  theory *= lat.cell_area() * lat.cell_area();

  std::vector<double> m2(n);
  for (int s = 0; s < n; ++s) {
    const Field m =
        gmc_density(lat, sample_path(lat, TimeGrid{1}, ens, s).w1(), beta);
    double acc = 0.0;
    for (std::size_t a = 0; a < ix.size(); ++a) acc += m(ix[a], iy[a]);
    const double mass = lat.cell_area() * acc;
    m2[s] = mass * mass;
  }
  const MeanSE ms = mean_se(m2);
  CHECK(std::abs(ms.mean - theory) <= 3.0 * ms.se);
}

TEST_CASE("scaling experiment validates input and recovers the area law") {
  const LatticeSpec lat = make_lattice(16, 0.25, 1.0);
  const NoiseEnsemble ens(13, 500);
  CHECK_THROWS_AS(gmc_scaling_experiment(lat, ens, 0.0, 1.5, {0.5, 1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      gmc_scaling_experiment(lat, ens, std::sqrt(4.0 * std::numbers::pi), 2.5,
                             {0.5, 1.0, 1.5}),
      std::invalid_argument);

  // beta = 0: the measure is Lebesgue, slope exactly 2 in the effective radius.
  const GmcScalingReport rep =
      gmc_scaling_experiment(lat, ens, 0.0, 1.5, {0.5, 1.0, 1.9});
  CHECK(rep.theory_slope == doctest::Approx(2.0));
  CHECK(rep.slope == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("subcritical scaling slope is near the theoretical exponent") {
  // Desk-scale version of the slope check; the acceptance suite runs the
  // full configuration.
  const LatticeSpec lat = make_lattice(32, 0.125, 0.5);
  const double beta = std::sqrt(2.0 * std::numbers::pi);
  const int n = 3000;
  const NoiseEnsemble ens(4000, n);
  const GmcScalingReport rep = gmc_scaling_experiment(
      lat, ens, beta, 2.0, {3 * 0.125, 6 * 0.125, 12 * 0.125});
  CHECK(rep.theory_slope == doctest::Approx(1.5));
  CHECK(std::abs(rep.slope - rep.theory_slope) <= 0.15 * rep.theory_slope);
}
