#pragma once

namespace liouvlab {

/// Scaled complementary error function exp(x^2) erfc(x), relative accuracy
/// ~1e-13 on the whole real line (overflows to +inf for x < -26.6).
double erfcx(double x);

/// exp(p^2/2) * int_p^inf exp(-s^2/2) ds = sqrt(pi/2) erfcx(p / sqrt 2).
double gaussian_mills(double p);

}  // namespace liouvlab
