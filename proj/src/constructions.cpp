#include "liouvlab/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "liouvlab/spectral.hpp"

namespace liouvlab {

double PiecewiseLinear::operator()(double x) const {
  if (knots.empty()) return 0.0;
  if (x <= knots.front()) return values.front();
  if (x >= knots.back()) return values.back() + tail_slope * (x - knots.back());
  const auto it = std::upper_bound(knots.begin(), knots.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - knots.begin());
  const double s = (x - knots[j - 1]) / (knots[j] - knots[j - 1]);
  return values[j - 1] + s * (values[j] - values[j - 1]);
}

std::vector<double> PiecewiseLinear::slopes() const {
  std::vector<double> out;
  for (std::size_t j = 1; j < knots.size(); ++j) {
    out.push_back((values[j] - values[j - 1]) / (knots[j] - knots[j - 1]));
  }
  out.push_back(tail_slope);
  return out;
}

OmegaFunction construct_omega(std::span<const double> t, std::span<const double> f, double M) {
  if (!(M > 0.0)) throw ModelError("construct_omega: M must be > 0");
  if (t.size() != f.size() || t.size() < 2) throw ModelError("construct_omega: need matching samples (>= 2)");
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (!(f[j] >= 0.0) || !std::isfinite(f[j])) throw ModelError("construct_omega: f must be finite and >= 0");
    if (j && !(t[j] > t[j - 1])) throw ModelError("construct_omega: t must increase");
  }
  std::vector<double> cumulative(t.size(), 0.0);
  for (std::size_t j = 1; j < t.size(); ++j) {
    cumulative[j] = cumulative[j - 1] + 0.5 * (t[j] - t[j - 1]) * (f[j] + f[j - 1]);
  }
  OmegaFunction omega;
  omega.curve.knots = {t.front()};
  omega.curve.values = {1.0};
  if (cumulative.back() < 0.5 * M) {
    omega.l1_branch = true;
    return omega;
  }
  double level = 0.0;
  for (int n = 1;; ++n) {
    const double target = level + M;
    if (target > cumulative.back()) break;
    // first cell whose right end reaches the target, then solve the quadratic
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
    const std::size_t j = static_cast<std::size_t>(it - cumulative.begin());
    double knot = t[j];
    if (cumulative[j] != target) {
      const double width = t[j] - t[j - 1];
      const double need = target - cumulative[j - 1];
      const double f0 = f[j - 1];
      const double df = (f[j] - f[j - 1]) / width;
      double x;
      if (std::abs(df) * width < 1e-14 * std::max(f0, 1e-300)) {
        x = need / f0;
      } else {
        // f0 x + df x^2 / 2 = need, stable root
        const double disc = std::sqrt(std::max(0.0, f0 * f0 + 2.0 * df * need));
        x = 2.0 * need / (f0 + disc);
      }
      knot = t[j - 1] + std::clamp(x, 0.0, width);
    }
    omega.segment_integrals.push_back(target - level);
    omega.curve.knots.push_back(knot);
    omega.curve.values.push_back(static_cast<double>(n + 1) * (n + 1));
    level = target;
  }
  if (omega.curve.knots.size() >= 2) {
    const std::size_t last = omega.curve.knots.size() - 1;
    omega.curve.tail_slope = (omega.curve.values[last] - omega.curve.values[last - 1]) /
                             (omega.curve.knots[last] - omega.curve.knots[last - 1]);
  }
  return omega;
}

double omega_weighted_integral(const OmegaFunction& omega, std::span<const double> t, std::span<const double> f) {
  double sum = 0.0;
  for (std::size_t j = 1; j < t.size(); ++j) {
    sum += 0.5 * (t[j] - t[j - 1]) * (f[j] / omega(t[j]) + f[j - 1] / omega(t[j - 1]));
  }
  return sum;
}

double ThetaFunction::operator()(double x) const {
  double s = 0.0;
  for (double level : levels) {
    if (x > level) s += x - level;
  }
  return s;
}

std::vector<double> ThetaFunction::slopes() const {
  std::vector<double> out(levels.size());
  std::iota(out.begin(), out.end(), 1.0);
  return out;
}

ThetaFunction construct_theta(std::span<const double> g, std::span<const double> weights, std::size_t level_count) {
  if (g.size() != weights.size()) throw ModelError("construct_theta: size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i]) || !std::isfinite(weights[i])) throw ModelError("construct_theta: infinite mean");
    if (g[i] < 0.0 || weights[i] < 0.0) throw ModelError("construct_theta: g and weights must be >= 0");
  }
  // candidate levels: 0 and the sample values, with tail(L) = sum_{g > L} w g
  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return g[a] > g[b]; });
  double tail = 0.0;
  std::size_t k = 0;
  // walk levels from the top: tail at level L counts samples strictly above L
  std::vector<std::pair<double, double>> table;  // (level, tail), decreasing level
  while (k < order.size()) {
    const double level = g[order[k]];
    table.emplace_back(level, tail);
    while (k < order.size() && g[order[k]] == level) {
      tail += weights[order[k]] * g[order[k]];
      ++k;
    }
  }
  if (table.empty() || table.back().first > 0.0) table.emplace_back(0.0, tail);
  if (!std::isfinite(tail)) throw ModelError("construct_theta: infinite mean");

  ThetaFunction theta;
  double previous = -INFINITY;
  for (std::size_t j = 1; j <= level_count; ++j) {
    const double bound = std::ldexp(1.0, -static_cast<int>(j) - 1) / static_cast<double>(j + 1);
    // smallest level with tail <= bound; table is ordered by decreasing level
    double candidate = table.front().first;
    for (const auto& [level, t] : table) {
      if (t <= bound) candidate = level;
      else break;
    }
    const double L = std::max(candidate, previous + 1.0);
    theta.levels.push_back(L);
    previous = L;
  }
  return theta;
}

}  // namespace liouvlab
