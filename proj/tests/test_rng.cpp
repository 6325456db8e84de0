#include <doctest.h>

#include <cmath>

#include "bdq/rng.hpp"
#include "bdq/stats.hpp"

using namespace bdq;

TEST_CASE("counter rng is a pure function of its counters") {
  const NoiseEnsemble ens(123, 10);
  const double a = ens.normal(3, 7, 11);
  const double b = ens.normal(3, 7, 11);
  CHECK(a == b);
  CHECK(ens.normal(3, 7, 12) != a);
  CHECK(ens.normal(4, 7, 11) != a);
  CHECK(ens.normal(3, 8, 11) != a);
  const NoiseEnsemble other(124, 10);
  CHECK(other.normal(3, 7, 11) != a);
}

TEST_CASE("streams do not collide") {
  const NoiseEnsemble ens(55, 4);
  CHECK(ens.normal(0, 0, 0, NoiseStream::kPathNoise) !=
        ens.normal(0, 0, 0, NoiseStream::kMcmc));
}

TEST_CASE("variates are standard normal") {
  const int n = 200000;
  std::vector<double> xs(n), x2(n), x4(n);
  const NoiseEnsemble ens(2024, 1);
  for (int i = 0; i < n; ++i) {
    const double v = ens.normal(0, i / 4096, i % 4096);
    xs[i] = v;
    x2[i] = v * v;
    x4[i] = v * v * v * v;
  }
  const MeanSE m = mean_se(xs);
  const MeanSE v = mean_se(x2);
  const MeanSE k = mean_se(x4);
  CHECK(std::abs(m.mean) < 4.0 * m.se);
  CHECK(std::abs(v.mean - 1.0) < 4.0 * v.se);
  CHECK(std::abs(k.mean - 3.0) < 4.0 * k.se);
}
