#pragma once

#include <cstddef>
#include <vector>

namespace bdq {

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

MeanSE mean_se(const std::vector<double>& xs);

/// -log((1/n) sum exp(e_i)) with delta-method SE and effective sample size,
/// computed in shifted form so large exponents never overflow.
struct LogMeanExp {
  double value = 0.0;
  double se = 0.0;
  double ess = 0.0;
};

LogMeanExp neg_log_mean_exp(const std::vector<double>& exponents);

/// Standard error of a correlated sequence by non-overlapping batch means.
double batch_means_se(const std::vector<double>& xs, int n_batches = 32);

double z_score(double a, double se_a, double b, double se_b);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LinearFit linear_fit(const std::vector<double>& xs,
                     const std::vector<double>& ys);

/// |a - b| <= tol * max(|a|, |b|, floor)
bool close_rel(double a, double b, double tol, double floor_ = 1e-12);

/// Gelman-Rubin potential scale reduction across chains of scalar draws.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

}  // namespace bdq
