#pragma once

#include <string>
#include <vector>

#include "liouvlab/spectral.hpp"

namespace liouvlab {

enum class ProfileKind { gauss_bump, sine, smooth_bump };
enum class Part { re, im };

std::string to_string(ProfileKind kind);
ProfileKind profile_from_string(const std::string& name);

/// One real coordinate Re<u, e_k> or Im<u, e_k> of mode index k.
struct Coord {
  std::size_t mode = 0;
  Part part = Part::re;
};

/// F(u) = phi(y_1, ..., y_n) with y_j the chosen real coordinates.
///   gauss_bump:  phi = exp(-sum a_j (y_j - c_j)^2)
///   sine:        phi = sin(sum a_j y_j + c_0)    (only c_0 is used)
///   smooth_bump: phi = prod_j b(a_j (y_j - c_j)), b(z) = exp(1 - 1/(1 - z^2)) on |z| < 1
class CylTestFunction {
 public:
  CylTestFunction(std::vector<Coord> coords, ProfileKind profile, std::vector<double> a,
                  std::vector<double> c = {});

  const std::vector<Coord>& coords() const { return coords_; }
  ProfileKind profile() const { return profile_; }
  const std::vector<double>& a() const { return a_; }
  const std::vector<double>& c() const { return c_; }
  std::size_t arity() const { return coords_.size(); }
  /// Largest mode index used.
  std::size_t max_mode() const;

  double phi(std::span<const double> y) const;
  void phi_gradient(std::span<const double> y, std::span<double> grad) const;

  std::vector<double> coordinates(const Field& u) const;
  double eval(const Field& u) const;
  /// Predual-scaled gradient: the pairing Re sum v_k conj(g_k) is dF(u)[v].
  Field grad(const Field& u) const;
  /// dF(u)[v] without forming the gradient field.
  double directional(const Field& u, const Field& v) const;

  std::string descriptor() const;

  /// Central-difference check of phi_gradient at y; returns max abs error.
  double gradient_check(std::span<const double> y, double eps) const;

 private:
  std::vector<Coord> coords_;
  ProfileKind profile_;
  std::vector<double> a_;
  std::vector<double> c_;
};

/// Five fixed test functions on the first three modes.
std::vector<CylTestFunction> standard_catalog(const SpectralModel& model);

}  // namespace liouvlab
