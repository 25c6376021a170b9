#include "liouvlab/stats.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "liouvlab/parallel.hpp"

namespace liouvlab {

MeanEstimate weighted_mean(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw std::invalid_argument("weighted_mean: size mismatch");
  if (values.empty()) throw std::invalid_argument("weighted_mean: empty input");
  std::vector<double> wx(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) wx[i] = weights[i] * values[i];
  const double wsum = pairwise_sum(weights);
  if (!(wsum > 0.0)) throw std::invalid_argument("weighted_mean: weights sum to zero");
  const double mean = pairwise_sum(wx) / wsum;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double dev = weights[i] * (values[i] - mean);
    wx[i] = dev * dev;
  }
  return {mean, std::sqrt(pairwise_sum(wx)) / wsum};
}

MeanEstimate sample_mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("sample_mean: empty input");
  const double n = static_cast<double>(values.size());
  const double mean = pairwise_sum(values) / n;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
  const double var = values.size() > 1 ? pairwise_sum(sq) / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

double effective_sample_size(std::span<const double> weights) {
  std::vector<double> sq(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) sq[i] = weights[i] * weights[i];
  const double s = pairwise_sum(weights);
  const double s2 = pairwise_sum(sq);
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double binomial_se(double p, double count) { return std::sqrt(p * (1.0 - p) / count); }

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace liouvlab
