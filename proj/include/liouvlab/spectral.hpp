#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace liouvlab {

using cplx = std::complex<double>;

/// Lattice wavevector. For d = 1 only the first component is used.
using Mode = std::array<int, 2>;

enum class OperatorKind { laplacian_plus_one, laplacian_mean_zero };

std::string to_string(OperatorKind kind);
OperatorKind operator_kind_from_string(const std::string& name);

/// Raised when a model, field or configuration violates a precondition.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Galerkin-truncated phase space on the flat torus T^d = R^d / (2 pi Z^d).
///
/// Modes are the lattice points with |k|_inf <= N (k = 0 removed for the
/// mean-zero operator), enumerated by increasing |k|^2 and then
/// lexicographically. Index 0 of every coefficient vector is the first mode
/// in that order.
///
/// The H-orthonormal basis is phi_k(x) = (2 pi)^{-d/2} exp(i k.x). The fixed
/// biorthogonal system is e_k = lambda_k^{-s/2} phi_k (unit vectors of the
/// predual H^s) and e*_k = lambda_k^{s/2} phi_k.
class SpectralModel {
 public:
  SpectralModel(int dimension, int cutoff, double sobolev_s, OperatorKind kind);

  int dimension() const { return dimension_; }
  int cutoff() const { return cutoff_; }
  double sobolev_s() const { return sobolev_s_; }
  OperatorKind kind() const { return kind_; }

  /// Number of retained modes M.
  std::size_t size() const { return modes_.size(); }

  std::span<const Mode> modes() const { return modes_; }
  const Mode& mode(std::size_t index) const { return modes_.at(index); }
  std::span<const double> eigenvalues() const { return eigenvalues_; }
  double eigenvalue(std::size_t index) const { return eigenvalues_.at(index); }

  /// Position of k in the mode order, if retained.
  std::optional<std::size_t> index_of(const Mode& k) const;

  /// |k|^2 of a retained mode.
  int norm2(std::size_t index) const;

  /// 64-bit FNV-1a of (d, N, s, kind); identifies the model in serialized data.
  std::uint64_t hash() const { return hash_; }

  bool operator==(const SpectralModel& other) const;

 private:
  int dimension_;
  int cutoff_;
  double sobolev_s_;
  OperatorKind kind_;
  std::vector<Mode> modes_;
  std::vector<double> eigenvalues_;
  std::vector<std::int32_t> lookup_;  // (2N+1)^d table, -1 for excluded
  std::uint64_t hash_;
};

using ModelPtr = std::shared_ptr<const SpectralModel>;

/// Validates the parameters and builds the truncated model.
///
/// Rejects d outside {1,2}, N < 1, s < 0, and s <= d/2 - 1 for the
/// laplacian_plus_one operator (the Gaussian measure is undefined there).
ModelPtr build_model(int dimension, int cutoff, double sobolev_s, OperatorKind kind);

/// FNV-1a over the little-endian bytes of (int64 d, int64 N, float64 s, int64 kind).
std::uint64_t model_hash(int dimension, int cutoff, double sobolev_s, OperatorKind kind);

/// Partial sum of lambda_k^{-(s+1)} over |k|_inf <= cutoff for the model's
/// operator and exponent. Comparing cutoffs N and 2N exhibits convergence.
double eigen_partial_sum(const SpectralModel& model, int cutoff);

/// Truncated element of H^{-s}: coefficients in the phi_k basis, in mode order.
struct Field {
  ModelPtr model;
  std::vector<cplx> coeffs;

  Field() = default;
  explicit Field(ModelPtr m);
  Field(ModelPtr m, std::vector<cplx> c);

  std::size_t size() const { return coeffs.size(); }
  bool is_finite() const;

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(cplx factor);
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(cplx factor, Field a);

/// Throws ModelError unless both fields live on the same model.
void require_same_model(const Field& a, const Field& b);

/// Field with a single unit coefficient on the given mode index.
Field basis_field(const ModelPtr& model, std::size_t index, cplx value = 1.0);

/// Dual basis element e*_k = lambda_k^{s/2} phi_k.
Field dual_basis(const ModelPtr& model, std::size_t index);

/// Predual basis element e_k = lambda_k^{-s/2} phi_k.
Field predual_basis(const ModelPtr& model, std::size_t index);

/// Duality bracket <u, e_k> (complex); real and imaginary parts are the two
/// real coordinates of mode k.
cplx coordinate(const Field& u, std::size_t index);

/// (sum_k lambda_k^r |u_k|^2)^{1/2}.
double sobolev_norm(const Field& u, double r);

/// Real H^{-s} inner product Re sum_k lambda_k^{-s} u_k conj(w_k).
double inner_minus_s(const Field& u, const Field& w);

/// Real L^2 pairing Re sum_k u_k conj(w_k); also the E*-E duality pairing
/// when w holds predual-scaled coefficients.
double real_pairing(const Field& u, const Field& w);

/// sum_k 2^{-k} |<u, e_k>| over the mode order (first mode weighted 1/2).
double weak_star_norm(const Field& u);

/// Coefficient-wise multiplication by exp(sign * i t lambda_k).
Field apply_semigroup(const Field& u, double t, int sign);
void apply_semigroup_inplace(std::span<cplx> coeffs, const SpectralModel& model, double t,
                             int sign);

/// T_n: keeps the first n modes, zeroes the rest. Requires 1 <= n <= M.
Field project(const Field& u, std::size_t n);

}  // namespace liouvlab
