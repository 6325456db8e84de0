#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bdq/gff.hpp"
#include "bdq/interaction.hpp"
#include "bdq/stats.hpp"

using namespace bdq;

namespace {

Field smooth_random(const LatticeSpec& lat, std::uint64_t seed, int idx) {
  return apply_spectral(lat, -1.0, standard_normal_field(lat, seed, idx));
}

}  // namespace

TEST_CASE("construction validates couplings") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  CHECK_THROWS_AS(make_phi4(lat, -1.0, full_mask(lat)), std::invalid_argument);
  CHECK_THROWS_AS(make_phi4(lat, 1.0, full_mask(lat), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_exponential(lat, 1.0, 0.0, full_mask(lat)),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      make_exponential(lat, 1.0, std::sqrt(8.0 * std::numbers::pi) + 0.01,
                       full_mask(lat)),
      std::invalid_argument);
  CHECK_THROWS_AS(make_phi4(lat, 1.0, Field::Constant(8, 8, -1.0)),
                  std::invalid_argument);
}

TEST_CASE("shifted quartic expansion equals the direct Wick difference") {
  for (int L : {4, 8, 16}) {
    const LatticeSpec lat = make_lattice(L, 0.5, 1.0);
    const InteractionSpec spec =
        make_phi4(lat, 0.7, disk_mask(lat, 0.4 * lat.side_length(), L / 2, L / 2));
    const double s2 = wick_sigma(lat, 1.0);
    const NoiseEnsemble ens(100 + L, 100);
    const TimeGrid tg{1};
    for (int i = 0; i < 100; ++i) {
      const EnhancedGFFPath path = sample_path(lat, tg, ens, i);
      const Field z = smooth_random(lat, 200 + L, i);
      const EnhancedFields enh = enhanced_at(path, 1, 1.0);
      const double expanded = potential_phi4_expanded(lat, spec, enh, z);
      const double direct = potential_phi4_direct(lat, spec, path.w1() + z, s2) -
                            potential_phi4_direct(lat, spec, path.w1(), s2);
      CHECK(close_rel(expanded, direct, 1e-9, 1e-12));
    }
  }
}

TEST_CASE("expanded potential vanishes for zero drift or zero coupling") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  const InteractionSpec spec = make_phi4(lat, 0.5, full_mask(lat));
  const NoiseEnsemble ens(3, 4);
  const EnhancedGFFPath path = sample_path(lat, TimeGrid{1}, ens, 0);
  const EnhancedFields enh = enhanced_at(path, 1, 1.0);
  CHECK(potential_phi4_expanded(lat, spec, enh, Field::Zero(8, 8)) == 0.0);

  const InteractionSpec free = make_phi4(lat, 0.0, full_mask(lat));
  CHECK(potential_phi4_expanded(lat, free, enh, smooth_random(lat, 4, 0)) == 0.0);
}

TEST_CASE("direct potential constants and lower bound") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  const Field mask = disk_mask(lat, 1.0, 4, 4);
  const double vol = lat.cell_area() * mask.sum();
  const InteractionSpec spec = make_phi4(lat, 0.5, mask);
  const double s2 = 0.3;
  CHECK(potential_phi4_direct(lat, spec, Field::Zero(8, 8), s2) ==
        doctest::Approx(0.5 * 3.0 * s2 * s2 * vol).epsilon(1e-12));

  const Field phi = standard_normal_field(lat, 5, 0);
  CHECK(potential_phi4_direct(lat, spec, phi, 0.0) ==
        doctest::Approx(0.5 * lat.cell_area() * (mask * phi.pow(4)).sum()));

  // V >= -6 lambda sigma^4 |mask| from the per-site quadratic minimum.
  const double bound = -6.0 * 0.5 * s2 * s2 * vol;
  for (int i = 0; i < 200; ++i) {
    const Field sample = 2.0 * standard_normal_field(lat, 6, i);
    CHECK(potential_phi4_direct(lat, spec, sample, s2) >= bound - 1e-12);
  }
}

TEST_CASE("phi4 gradient passes finite differences and honors the mask") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  const Field mask = disk_mask(lat, 1.2, 4, 4);
  const InteractionSpec spec = make_phi4(lat, 0.5, mask);
  const NoiseEnsemble ens(9, 4);
  const EnhancedGFFPath path = sample_path(lat, TimeGrid{1}, ens, 1);
  const EnhancedFields enh = enhanced_at(path, 1, 1.0);
  const Field z = smooth_random(lat, 10, 0);
  const Field grad = grad_potential_phi4(lat, spec, enh, z);

  // Vanishes off the mask.
  CHECK(((1.0 - mask) * grad).abs().maxCoeff() == 0.0);

  const double h = 1e-4;
  for (int dir = 0; dir < 10; ++dir) {
    const Field k = smooth_random(lat, 11, dir);
    const double fd = (potential_phi4_expanded(lat, spec, enh, z + h * k) -
                       potential_phi4_expanded(lat, spec, enh, z - h * k)) /
                      (2.0 * h);
    const double pairing = inner_product(lat, grad, k);
    CHECK(close_rel(fd, pairing, 1e-5, 1e-10));
  }
}

TEST_CASE("exponential potential: Shamov value, positivity, convexity") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  const double beta = std::sqrt(2.0 * std::numbers::pi);
  const Field xi = bump_field(lat, 1.5, 1.0, 4, 4);
  const InteractionSpec spec = make_exponential(lat, 1.2, beta, xi);
  const NoiseEnsemble ens(21, 8);
  const Field w1 = sample_path(lat, TimeGrid{1}, ens, 0).w1();
  const Field gmc = gmc_density(lat, w1, beta);

  // Zero drift reduces to lambda * int xi dM.
  CHECK(potential_exp(lat, spec, gmc, Field::Zero(8, 8)) ==
        doctest::Approx(1.2 * lat.cell_area() * (xi * gmc).sum()).epsilon(1e-12));

  // Zero cutoff kills it.
  InteractionSpec nocut = spec;
  nocut.cutoff = Field::Zero(8, 8);
  CHECK(potential_exp(lat, nocut, gmc, smooth_random(lat, 22, 0)) == 0.0);

  // Positivity and pointwise monotonicity in Z.
  const Field z = smooth_random(lat, 23, 0);
  const double base = potential_exp(lat, spec, gmc, z);
  CHECK(base >= 0.0);
  CHECK(potential_exp(lat, spec, gmc, z + 0.3) > base);

  // Midpoint convexity on random pairs.
  for (int i = 0; i < 100; ++i) {
    const Field za = smooth_random(lat, 24, 2 * i);
    const Field zb = smooth_random(lat, 24, 2 * i + 1);
    const double mid = potential_exp(lat, spec, gmc, 0.5 * (za + zb));
    const double avg = 0.5 * (potential_exp(lat, spec, gmc, za) +
                              potential_exp(lat, spec, gmc, zb));
    CHECK(mid <= avg + 1e-12 * std::abs(avg));
  }
}

TEST_CASE("exponential gradient finite differences and overflow guard") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  const double beta = 1.5;
  const Field xi = bump_field(lat, 1.5, 1.0, 4, 4);
  const InteractionSpec spec = make_exponential(lat, 0.8, beta, xi);
  const NoiseEnsemble ens(31, 4);
  const Field gmc =
      gmc_density(lat, sample_path(lat, TimeGrid{1}, ens, 0).w1(), beta);
  const Field z = smooth_random(lat, 32, 0);

  const Field grad = grad_potential_exp(lat, spec, gmc, z);
  const double h = 1e-4;
  for (int dir = 0; dir < 10; ++dir) {
    const Field k = smooth_random(lat, 33, dir);
    const double fd = (potential_exp(lat, spec, gmc, z + h * k) -
                       potential_exp(lat, spec, gmc, z - h * k)) /
                      (2.0 * h);
    CHECK(close_rel(fd, inner_product(lat, grad, k), 1e-5, 1e-12));
  }

  // Small-beta consistency: (V(beta) - V(0)) / beta -> lambda int xi Z dM^0.
  const double eps_b = 1e-5;
  const InteractionSpec tiny = make_exponential(lat, 0.8, eps_b, xi);
  const Field gmc0 = gmc_density(lat, Field::Zero(8, 8), 0.0);
  const double lhs =
      (potential_exp(lat, tiny, gmc0, z) - 0.8 * lat.cell_area() * xi.sum()) /
      eps_b;
  const double rhs = 0.8 * lat.cell_area() * (xi * z).sum();
  CHECK(close_rel(lhs, rhs, 1e-3, 1e-9));

  // Large drift excursions stay finite through the shifted accumulation.
  const Field huge = Field::Constant(8, 8, 120.0);
  const double v = potential_exp(lat, spec, gmc, huge);
  CHECK(std::isfinite(v));
  CHECK(v > 0.0);
}

TEST_CASE("rate function values, bound, and convexity") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.3);
  const InteractionSpec spec = make_phi4(lat, 0.5, full_mask(lat));

  CHECK(rate_function_J(lat, spec, Field::Zero(8, 8)) == 0.0);

  const double c = 0.7;
  const double ell2 = lat.side_length() * lat.side_length();
  const double expected = 0.5 * std::pow(c, 4) * ell2 +
                          0.5 * 1.3 * 1.3 * c * c * ell2;
  CHECK(rate_function_J(lat, spec, Field::Constant(8, 8, c)) ==
        doctest::Approx(expected).epsilon(1e-12));

  for (int i = 0; i < 50; ++i) {
    const Field phi = smooth_random(lat, 41, i);
    const Field psi = smooth_random(lat, 42, i);
    const double m2 = 1.3 * 1.3;
    CHECK(rate_function_J(lat, spec, phi) >=
          0.5 * m2 * std::pow(lp_norm(lat, phi, 2.0), 2) - 1e-10);
    const double mid = rate_function_J(lat, spec, 0.5 * (phi + psi));
    const double avg = 0.5 * (rate_function_J(lat, spec, phi) +
                              rate_function_J(lat, spec, psi));
    CHECK(mid <= avg + 1e-10 * std::abs(avg));
  }

  // Gradient against finite differences.
  const Field phi = smooth_random(lat, 43, 0);
  const Field grad = grad_rate_function_J(lat, spec, phi);
  const double h = 1e-5;
  for (int dir = 0; dir < 5; ++dir) {
    const Field k = smooth_random(lat, 44, dir);
    const double fd = (rate_function_J(lat, spec, phi + h * k) -
                       rate_function_J(lat, spec, phi - h * k)) /
                      (2.0 * h);
    CHECK(close_rel(fd, inner_product(lat, grad, k), 1e-6, 1e-10));
  }
}

TEST_CASE("semiclassical rescaling") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  const InteractionSpec spec = make_phi4(lat, 0.5, full_mask(lat));
  const InteractionSpec same = semiclassical_rescale(spec, 1.0);
  CHECK(same.hbar == 1.0);
  CHECK_THROWS_AS(semiclassical_rescale(spec, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(semiclassical_rescale(spec, 1.5), std::invalid_argument);

  // Wick constant scales linearly: the hbar-enhancement of a path carries
  // hbar * wick2.
  const NoiseEnsemble ens(51, 2);
  const EnhancedGFFPath path = sample_path(lat, TimeGrid{2}, ens, 0);
  const EnhancedFields e1 = enhanced_at(path, 2, 1.0);
  const EnhancedFields eh = enhanced_at(path, 2, 0.25);
  CHECK((eh.w - 0.5 * e1.w).abs().maxCoeff() < 1e-14);
  CHECK((eh.wick2 - 0.25 * e1.wick2).abs().maxCoeff() < 1e-14);
  CHECK((eh.wick3 - 0.125 * e1.wick3).abs().maxCoeff() < 1e-14);
}

TEST_CASE("wrong interaction kind is rejected") {
  const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  const InteractionSpec exp_spec =
      make_exponential(lat, 1.0, 1.0, full_mask(lat));
  const NoiseEnsemble ens(61, 2);
  const EnhancedGFFPath path = sample_path(lat, TimeGrid{1}, ens, 0);
  const EnhancedFields enh = enhanced_at(path, 1, 1.0);
  CHECK_THROWS_AS(potential_phi4_expanded(lat, exp_spec, enh, Field::Zero(8, 8)),
                  std::invalid_argument);
  const InteractionSpec p4 = make_phi4(lat, 1.0, full_mask(lat));
  CHECK_THROWS_AS(
      potential_exp(lat, p4, Field::Ones(8, 8), Field::Zero(8, 8)),
      std::invalid_argument);
}
