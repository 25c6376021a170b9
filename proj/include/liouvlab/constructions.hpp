#pragma once

#include <span>
#include <vector>

namespace liouvlab {

/// Piecewise-linear function through (knots, values), constant before
/// the first knot and extended with `tail_slope` after the last.
struct PiecewiseLinear {
  std::vector<double> knots;
  std::vector<double> values;
  double tail_slope = 0.0;

  double operator()(double x) const;
  /// Slopes of the interior segments followed by tail_slope.
  std::vector<double> slopes() const;
};

struct OmegaFunction {
  PiecewiseLinear curve;  // omega(a_n) = (n+1)^2, a_0 = window start
  bool l1_branch = false;  // omega = 1 because f was integrable on the window
  std::vector<double> segment_integrals;  // int_{a_{n-1}}^{a_n} f

  double operator()(double t) const { return curve(t); }
};

/// Greedy knot selection on samples (t_j, f_j), t increasing from the window
/// start: each full interval carries int f = M exactly (piecewise-linear f),
/// the last partial interval may carry less. If the whole window carries less
/// than M/2 the L^1 branch omega = 1 is returned.
OmegaFunction construct_omega(std::span<const double> t, std::span<const double> f, double M);

/// int f / omega by the trapezoid rule on the sample grid.
double omega_weighted_integral(const OmegaFunction& omega, std::span<const double> t, std::span<const double> f);

struct ThetaFunction {
  std::vector<double> levels;  // L_1 < L_2 < ...; slope j on [L_j, L_{j+1}]

  double operator()(double x) const;
  std::vector<double> slopes() const;
};

/// de la Vallee-Poussin function for the weighted sample (g_i, w_i):
/// theta(x) = sum_j (x - L_j)_+ with tail int_{g > L_j} g <= 2^{-j-1}/(j+1),
/// so sum_i w_i theta(g_i) <= 1.
ThetaFunction construct_theta(std::span<const double> g, std::span<const double> weights,
                              std::size_t level_count = 60);

}  // namespace liouvlab
