#include <doctest.h>

#include <cmath>

#include "bdq/gff.hpp"
#include "bdq/stats.hpp"

using namespace bdq;

namespace {

const LatticeSpec& lat8() {
  static const LatticeSpec lat = make_lattice(8, 0.5, 1.0);
  return lat;
}

}  // namespace

TEST_CASE("wick sigma is t times the green function at zero") {
  CHECK(wick_sigma(lat8(), 0.0) == 0.0);
  CHECK(wick_sigma(lat8(), 1.0) ==
        doctest::Approx(green_function(lat8())(0, 0)).epsilon(1e-12));
  CHECK(wick_sigma(lat8(), 0.5) == doctest::Approx(0.5 * wick_sigma(lat8(), 1.0)));
  CHECK_THROWS_AS(wick_sigma(lat8(), 1.5), std::invalid_argument);
}

TEST_CASE("paths are reproducible and adapted to the increments") {
  const TimeGrid tg{4};
  const NoiseEnsemble ens(77, 10);
  const EnhancedGFFPath a = sample_path(lat8(), tg, ens, 2);
  const EnhancedGFFPath b = sample_path(lat8(), tg, ens, 2);
  for (int j = 0; j <= 4; ++j) {
    CHECK((a.w(j) == b.w(j)).all());
  }

  // Permuting future increments leaves the earlier path bit-identical.
  std::vector<Field> inc;
  for (int j = 0; j < 4; ++j) inc.push_back(a.x_increment(j));
  std::swap(inc[2], inc[3]);
  const EnhancedGFFPath c(lat8(), tg, inc);
  CHECK((c.w(1) == a.w(1)).all());
  CHECK((c.w(2) == a.w(2)).all());
  CHECK_FALSE((c.w(3) == a.w(3)).all());
}

TEST_CASE("terminal variance matches the green function") {
  const TimeGrid tg{1};
  const int n = 20000;
  const NoiseEnsemble ens(2025, n);
  std::vector<double> sq(n);
  for (int i = 0; i < n; ++i) {
    const double v = sample_path(lat8(), tg, ens, i).w1()(0, 0);
    sq[i] = v * v;
  }
  const MeanSE ms = mean_se(sq);
  const double g0 = green_function(lat8())(0, 0);
  CHECK(std::abs(ms.mean - g0) <= 3.0 * ms.se);
}

TEST_CASE("variance scales linearly in time") {
  const TimeGrid tg{4};
  const int n = 20000;
  const NoiseEnsemble ens(99, n);
  std::vector<double> half(n);
  for (int i = 0; i < n; ++i) {
    const double v = sample_path(lat8(), tg, ens, i).w(2)(1, 1);
    half[i] = v * v;
  }
  const MeanSE ms = mean_se(half);
  const double g0 = green_function(lat8())(0, 0);
  CHECK(std::abs(ms.mean - 0.5 * g0) <= 3.0 * ms.se);
}

TEST_CASE("wick powers of an injected zero path") {
  const TimeGrid tg{2};
  std::vector<Field> zeros(2, Field::Zero(8, 8));
  const EnhancedGFFPath p(lat8(), tg, zeros);
  const auto [w2, w3] = enhance(p, 2);
  CHECK((w2 + wick_sigma(lat8(), 1.0)).abs().maxCoeff() == 0.0);
  CHECK(w3.abs().maxCoeff() == 0.0);
}

TEST_CASE("wick means vanish and the quadratic covariance matches Isserlis") {
  const TimeGrid tg{1};
  const int n = 10000;
  const NoiseEnsemble ens(31337, n);
  const Field g = green_function(lat8());

  std::vector<double> w2mean(n), w3w(n), w2w2(n);
  const int dx = 2, dy = 1;
  for (int i = 0; i < n; ++i) {
    const EnhancedGFFPath p = sample_path(lat8(), tg, ens, i);
    const Field w2 = p.wick2(1);
    const Field w3 = p.wick3(1);
    const Field& w = p.w1();
    w2mean[i] = w2.mean();
    // Translation-averaged cross moments at offset (dx, dy).
    double a = 0.0, b = 0.0;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        a += w3(x, y) * w((x + dx) % 8, (y + dy) % 8);
        b += w2(x, y) * w2((x + dx) % 8, (y + dy) % 8);
      }
    }
    w3w[i] = a / 64.0;
    w2w2[i] = b / 64.0;
  }
  const MeanSE m2 = mean_se(w2mean);
  CHECK(std::abs(m2.mean) <= 3.0 * m2.se);

  // E[[[W^3]](x) W(y)] = 3 G(r) G(0) - 3 sigma^2 G(r) = 0 at t = 1.
  const MeanSE m3 = mean_se(w3w);
  CHECK(std::abs(m3.mean) <= 3.0 * m3.se);

  // E[[[W^2]](x) [[W^2]](y)] = 2 G(r)^2.
  const MeanSE m22 = mean_se(w2w2);
  const double theory = 2.0 * g(dx, dy) * g(dx, dy);
  CHECK(std::abs(m22.mean - theory) <= 3.0 * m22.se);
}

TEST_CASE("covariance check against the kernel") {
  const TimeGrid tg{4};
  const NoiseEnsemble ens(4242, 3000);
  const CovarianceReport rep =
      covariance_check(ens, lat8(), tg, {{0, 0}, {1, 0}, {2, 1}});
  CHECK(rep.max_abs_z <= 3.5);
  CHECK(rep.rows.size() == 7);
  CHECK_THROWS_AS(covariance_check(NoiseEnsemble(1, 10), lat8(), tg, {{0, 0}}),
                  std::invalid_argument);
}

TEST_CASE("per-mode martingale variance is linear in t") {
  const TimeGrid tg{8};
  const int n = 4000;
  const NoiseEnsemble ens(555, n);
  const int L = 8;
  Field wave(L, L);
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < L; ++i) {
      wave(i, j) = std::cos(2.0 * M_PI * i / L);
    }
  }
  const double lam = lat8().mode_eigenvalues()(1, 0);
  const double m2 = lat8().mass() * lat8().mass();
  // Var <W_t, wave> = t <wave, C wave> = t ||wave||^2 / (m^2 + lambda_(1,0)).
  const double norm2 = inner_product(lat8(), wave, wave);
  for (int j : {2, 4, 8}) {
    std::vector<double> proj(n);
    for (int i = 0; i < n; ++i) {
      proj[i] = inner_product(lat8(), sample_path(lat8(), tg, ens, i).w(j), wave);
    }
    double ss = 0.0;
    for (double p : proj) ss += p * p;
    const double ratio = ss / n / (tg.time(j) * norm2 / (m2 + lam));
    // Two-sided 1% chi^2 band for n = 4000 is about +-0.058.
    CHECK(ratio > 1.0 - 0.06);
    CHECK(ratio < 1.0 + 0.06);
  }
}
