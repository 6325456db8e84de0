#include "bdq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bdq {

MeanSE mean_se(const std::vector<double>& xs) {
  MeanSE r;
  r.n = xs.size();
  if (r.n == 0) return r;
  double sum = 0.0;
  for (double x : xs) sum += x;
  r.mean = sum / r.n;
  if (r.n < 2) return r;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.se = std::sqrt(ss / (r.n - 1) / r.n);
  return r;
}

LogMeanExp neg_log_mean_exp(const std::vector<double>& exponents) {
  if (exponents.empty()) throw std::invalid_argument("empty sample");
  const double emax = *std::max_element(exponents.begin(), exponents.end());
  const std::size_t n = exponents.size();
  double sum = 0.0, sum2 = 0.0;
  for (double e : exponents) {
    const double r = std::exp(e - emax);
    sum += r;
    sum2 += r * r;
  }
  LogMeanExp out;
  const double mean_r = sum / n;
  out.value = -(emax + std::log(mean_r));
  if (n > 1) {
    const double var_r = std::max(0.0, (sum2 - n * mean_r * mean_r) / (n - 1));
    out.se = std::sqrt(var_r / n) / mean_r;
  }
  out.ess = sum2 > 0.0 ? sum * sum / sum2 : 0.0;
  return out;
}

double batch_means_se(const std::vector<double>& xs, int n_batches) {
  const std::size_t n = xs.size();
  if (n < static_cast<std::size_t>(2 * n_batches)) {
    return mean_se(xs).se;
  }
  const std::size_t bsize = n / n_batches;
  std::vector<double> means;
  means.reserve(n_batches);
  for (int b = 0; b < n_batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * bsize; i < (b + 1) * bsize; ++i) s += xs[i];
    means.push_back(s / bsize);
  }
  return mean_se(means).se;
}

double z_score(double a, double se_a, double b, double se_b) {
  const double denom = std::sqrt(se_a * se_a + se_b * se_b);
  if (denom == 0.0) return a == b ? 0.0 : std::numeric_limits<double>::infinity();
  return (a - b) / denom;
}

LinearFit linear_fit(const std::vector<double>& xs,
                     const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw std::invalid_argument("linear_fit: need >= 2 points");
  }
  const std::size_t n = xs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  LinearFit f;
  const double denom = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

bool close_rel(double a, double b, double tol, double floor_) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), floor_});
}

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) return 1.0;
  const std::size_t n = chains[0].size();
  std::vector<double> chain_means(m);
  double grand = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    chain_means[c] = mean_se(chains[c]).mean;
    grand += chain_means[c];
  }
  grand /= m;
  double B = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    B += (chain_means[c] - grand) * (chain_means[c] - grand);
  }
  B *= static_cast<double>(n) / (m - 1);
  double W = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    double ss = 0.0;
    for (double x : chains[c]) ss += (x - chain_means[c]) * (x - chain_means[c]);
    W += ss / (n - 1);
  }
  W /= m;
  if (W == 0.0) return 1.0;
  const double var_plus = (n - 1.0) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

}  // namespace bdq
