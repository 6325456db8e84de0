#include <doctest.h>

#include <cmath>
#include <set>

#include "bdq/lattice.hpp"
#include "bdq/rng.hpp"

using namespace bdq;

TEST_CASE("mode eigenvalues for tiny lattices") {
  const LatticeSpec lat = make_lattice(2, 1.0, 1.0);
  std::multiset<double> vals;
  for (int k1 = 0; k1 < 2; ++k1) {
    for (int k2 = 0; k2 < 2; ++k2) vals.insert(lat.mode_eigenvalues()(k1, k2));
  }
  const std::multiset<double> expected{0.0, 4.0, 4.0, 8.0};
  auto it = expected.begin();
  for (double v : vals) {
    CHECK(v == doctest::Approx(*it).epsilon(1e-14));
    ++it;
  }

  const LatticeSpec lat4 = make_lattice(4, 1.0, 1.0);
  CHECK(lat4.mode_eigenvalues()(0, 0) == 0.0);

  const LatticeSpec lat8 = make_lattice(8, 0.5, 2.0);
  CHECK(lat8.mode_eigenvalues().maxCoeff() == doctest::Approx(32.0));
}

TEST_CASE("construction rejects bad arguments") {
  CHECK_THROWS_AS(make_lattice(3, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_lattice(0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_lattice(8, -0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_lattice(8, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("fourier round trip and Parseval") {
  const LatticeSpec lat = make_lattice(16, 0.5, 1.3);
  const Field f = standard_normal_field(lat, 7, 0);
  const Field g = standard_normal_field(lat, 7, 1);

  Spectrum s = forward_fft(f);
  fft2(s, true);
  CHECK((s.real() - f).abs().maxCoeff() < 1e-12 * f.abs().maxCoeff());

  const Spectrum sf = forward_fft(f);
  const Spectrum sg = forward_fft(g);
  const double direct = inner_product(lat, f, g);
  const double modes = lat.cell_area() / lat.n_sites() *
                       (sf * sg.conjugate()).sum().real();
  CHECK(direct == doctest::Approx(modes).epsilon(1e-12));
}

TEST_CASE("apply_spectral basics") {
  const LatticeSpec lat = make_lattice(8, 0.7, 1.4);
  const Field f = standard_normal_field(lat, 3, 0);

  CHECK((apply_spectral(lat, 0.0, f) - f).abs().maxCoeff() == 0.0);

  const Field c = Field::Constant(8, 8, 2.5);
  const Field cm2 = apply_spectral(lat, 1.0, c);
  CHECK(cm2.maxCoeff() == doctest::Approx(2.5 * 1.4 * 1.4).epsilon(1e-12));
  CHECK(cm2.minCoeff() == doctest::Approx(2.5 * 1.4 * 1.4).epsilon(1e-12));

  // Inverse pair and composition.
  const Field rt = apply_spectral(lat, -0.7, apply_spectral(lat, 0.7, f));
  CHECK((rt - f).abs().maxCoeff() < 1e-12 * f.abs().maxCoeff());
  const Field ab = apply_spectral(lat, 0.4, apply_spectral(lat, 0.9, f));
  const Field once = apply_spectral(lat, 1.3, f);
  CHECK((ab - once).abs().maxCoeff() < 1e-11 * once.abs().maxCoeff());

  Field bad = f;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(apply_spectral(lat, 1.0, bad), std::invalid_argument);
}

TEST_CASE("green function identities") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  const Field g = green_function(lat);

  // Kernel from apply_spectral(-1) of a site indicator.
  Field delta = Field::Zero(8, 8);
  delta(0, 0) = 1.0;
  const Field via_spectral = apply_spectral(lat, -1.0, delta);
  CHECK((via_spectral / lat.cell_area() - g).abs().maxCoeff() < 1e-12);

  // Mode-sum value at the origin.
  const double m2 = 1.0;
  double mode_sum = 0.0;
  for (int k1 = 0; k1 < 8; ++k1) {
    for (int k2 = 0; k2 < 8; ++k2) {
      mode_sum += 1.0 / (m2 + lat.mode_eigenvalues()(k1, k2));
    }
  }
  mode_sum /= lat.side_length() * lat.side_length();
  CHECK(g(0, 0) == doctest::Approx(mode_sum).epsilon(1e-12));

  // Evenness: G(x) = G(-x) exactly.
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      CHECK(g(i, j) == doctest::Approx(g((8 - i) % 8, (8 - j) % 8)).epsilon(1e-13));
    }
  }

  // Zero-mode identity: a^2 sum_x G(x) = 1/m^2.
  CHECK(lat.cell_area() * g.sum() == doctest::Approx(1.0).epsilon(1e-12));

  // Heavy-mass limit: G(0) ~ 1/(m^2 a^2) within 1%.
  const LatticeSpec heavy = make_lattice(8, 0.5, 100.0);
  const double g0 = green_function(heavy)(0, 0);
  CHECK(std::abs(g0 - 1.0 / (100.0 * 100.0 * 0.25)) < 0.01 * g0);
}

TEST_CASE("lp norms") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  const Field f = standard_normal_field(lat, 11, 0);
  CHECK(lp_norm(lat, f, 2.0) ==
        doctest::Approx(std::sqrt(inner_product(lat, f, f))).epsilon(1e-12));
  CHECK(lp_norm(lat, f, std::numeric_limits<double>::infinity()) ==
        doctest::Approx(f.abs().maxCoeff()));
  CHECK(lp_norm(lat, 2.0 * f, 4.0) ==
        doctest::Approx(2.0 * lp_norm(lat, f, 4.0)).epsilon(1e-12));
}
