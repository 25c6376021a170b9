#pragma once

#include <functional>
#include <span>
#include <vector>

#include "liouvlab/cylinder.hpp"
#include "liouvlab/liouville.hpp"

namespace liouvlab {

/// Weighted points in R^dim, row-major.
struct PointCloud {
  std::size_t dim = 0;
  std::vector<double> coords;
  std::vector<double> weights;

  std::size_t size() const { return dim ? coords.size() / dim : 0; }
  std::span<const double> point(std::size_t i) const { return {coords.data() + i * dim, dim}; }
};

/// pi_n: the first n real coordinates Re<u,e_1>, Im<u,e_1>, Re<u,e_2>, ...
std::vector<double> leading_coordinates(const Field& u, std::size_t n);
std::vector<Coord> leading_coords(std::size_t n);

/// Norm on R^n induced by the weak-* norm: sum over modes of 2^{-(m+1)} times
/// the Euclidean norm of that mode's (re, im) pair.
double projected_star_norm(std::span<const double> y);

struct ProjectionResult {
  std::size_t n = 0;
  double bandwidth = 0.0;
  std::vector<double> query_points;   // q x n
  std::vector<double> values;         // q x n, v^n at the queries
  std::vector<double> standard_error; // q x n
  std::vector<double> ess_per_query;
  std::vector<char> supported;        // 0 where kernel mass < 1e-6 of total

  std::size_t query_count() const { return n ? query_points.size() / n : 0; }
};

/// Gaussian-kernel Nadaraya-Watson regression of `values` (count x m) on the
/// cloud. If leave_one_out is set, query j is cloud point j and excludes it.
ProjectionResult nadaraya_watson(const PointCloud& cloud, std::span<const double> values, std::size_t m,
                                 std::span<const double> queries, double bandwidth, bool leave_one_out = false);

/// Conditional expectation of pi_n v(t,u) given pi_n u = y under mu_t.
ProjectionResult project_vector_field(const StateFamily& family, const VectorField& v, double t, std::size_t n,
                                      std::span<const double> queries, double bandwidth);

struct ProjectedResidual {
  std::vector<double> bandwidths;
  std::vector<ResidualRecord> records;  // one per bandwidth
  double extrapolated_residual = 0.0;   // h -> 0 by least squares in h^2
  double extrapolated_se = 0.0;
  double z = 0.0;
  double contraction_lhs = 0.0;  // weighted mean of |||v^n(y)|||
  double contraction_rhs = 0.0;  // weighted mean of ||v||_*
  double contraction_se = 0.0;
};

/// Projected Liouville residual for F on the first n coordinates, with the
/// projected field estimated by leave-one-out Nadaraya-Watson at the sample
/// points. `vhat_drift` (if non-empty) is added to the estimate.
ProjectedResidual projected_liouville_residual(const StateFamily& family, const VectorField& v, std::size_t n,
                                               const CylTestFunction& F, double t, double dt_fd,
                                               const std::vector<double>& bandwidths,
                                               std::span<const double> vhat_drift = {});

using PointField = std::function<void(std::span<const double> x, std::span<double> out)>;

struct MollifyResult {
  std::vector<double> density;  // mu^eps at the queries
  std::vector<double> field;    // v^eps at the queries, q x dim
};

/// mu^eps = mu * rho_eps, v^eps = ((v mu) * rho_eps) / mu^eps with the
/// Gaussian mollifier rho_eps.
MollifyResult mollify(const PointCloud& e, const PointField& v, double eps, std::span<const double> queries);

struct BoundCheck {
  double lhs = 0.0;        // quadrature of theta(|v^eps|) mu^eps
  double rhs = 0.0;        // weighted mean of theta(|v|)
  double slack = 0.0;      // rhs - lhs
  double grid_mass = 0.0;  // quadrature of mu^eps
  double tolerance = 1e-3;
  bool grid_ok = false;
  bool holds = false;
};

/// Tensor grid of the given spacing over the sample box enlarged by 6 eps.
/// Throws ModelError if spacing > eps / 4.
BoundCheck check_mollify_bound(const PointCloud& e, const PointField& v, double eps, double spacing,
                               const std::function<double(double)>& theta = {});

}  // namespace liouvlab
