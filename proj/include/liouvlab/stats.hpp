#pragma once

#include <span>
#include <vector>

namespace liouvlab {

struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;
};

/// Self-normalised weighted mean with delta-method standard error
/// se^2 = sum w_i^2 (x_i - mean)^2 / (sum w_i)^2.
MeanEstimate weighted_mean(std::span<const double> values, std::span<const double> weights);

/// Plain sample mean with se = sd / sqrt(n).
MeanEstimate sample_mean(std::span<const double> values);

/// (sum w)^2 / sum w^2.
double effective_sample_size(std::span<const double> weights);

double normal_cdf(double x);

/// Standard error of a binomial proportion.
double binomial_se(double p, double count);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace liouvlab
