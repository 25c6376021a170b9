#include "liouvlab/special.hpp"

#include <cmath>
#include <numbers>

namespace liouvlab {

namespace {

// Lentz evaluation of erfc(x) e^{x^2} = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
double erfcx_continued_fraction(double x) {
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int n = 1; n < 500; ++n) {
    const double a = 0.5 * n;
    d = x + a * d;
    if (std::abs(d) < tiny) d = tiny;
    c = x + a / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / (std::sqrt(std::numbers::pi) * f);
}

}  // namespace

double erfcx(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) {
    // erfc(x) = 2 - erfc(-x)
    const double e2 = std::exp(x * x);
    return 2.0 * e2 - erfcx(-x);
  }
  // erfc(x) keeps full relative precision until it underflows near x ~ 26
  if (x < 5.0) return std::exp(x * x) * std::erfc(x);
  return erfcx_continued_fraction(x);
}

double gaussian_mills(double p) {
  return std::sqrt(std::numbers::pi / 2.0) * erfcx(p / std::numbers::sqrt2);
}

}  // namespace liouvlab
