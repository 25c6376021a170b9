#include "liouvlab/spectral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace liouvlab {

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::laplacian_plus_one: return "laplacian_plus_one";
    case OperatorKind::laplacian_mean_zero: return "laplacian_mean_zero";
  }
  return "unknown";
}

OperatorKind operator_kind_from_string(const std::string& name) {
  if (name == "laplacian_plus_one" || name == "plus_one") return OperatorKind::laplacian_plus_one;
  if (name == "laplacian_mean_zero" || name == "mean_zero") return OperatorKind::laplacian_mean_zero;
  throw ModelError("unknown operator kind '" + name + "'");
}

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_mix(std::uint64_t& h, std::uint64_t word) {
  for (int byte = 0; byte < 8; ++byte) {
    h ^= (word >> (8 * byte)) & 0xffu;
    h *= kFnvPrime;
  }
}

int lattice_norm2(const Mode& k) { return k[0] * k[0] + k[1] * k[1]; }

double eigenvalue_for(const Mode& k, OperatorKind kind) {
  const double n2 = lattice_norm2(k);
  return kind == OperatorKind::laplacian_plus_one ? n2 + 1.0 : n2;
}

}  // namespace

std::uint64_t model_hash(int dimension, int cutoff, double sobolev_s, OperatorKind kind) {
  std::uint64_t h = kFnvOffset;
  fnv_mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(dimension)));
  fnv_mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(cutoff)));
  fnv_mix(h, std::bit_cast<std::uint64_t>(sobolev_s));
  fnv_mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(kind)));
  return h;
}

SpectralModel::SpectralModel(int dimension, int cutoff, double sobolev_s, OperatorKind kind)
    : dimension_(dimension), cutoff_(cutoff), sobolev_s_(sobolev_s), kind_(kind) {
  const int side = 2 * cutoff + 1;
  const int k2min = dimension == 2 ? -cutoff : 0;
  const int k2max = dimension == 2 ? cutoff : 0;
  for (int k1 = -cutoff; k1 <= cutoff; ++k1) {
    for (int k2 = k2min; k2 <= k2max; ++k2) {
      Mode k{k1, k2};
      if (kind == OperatorKind::laplacian_mean_zero && k1 == 0 && k2 == 0) continue;
      modes_.push_back(k);
    }
  }
  std::sort(modes_.begin(), modes_.end(), [](const Mode& a, const Mode& b) {
    const int na = lattice_norm2(a), nb = lattice_norm2(b);
    if (na != nb) return na < nb;
    return a < b;
  });
  eigenvalues_.reserve(modes_.size());
  for (const auto& k : modes_) eigenvalues_.push_back(eigenvalue_for(k, kind));

  const std::size_t table = dimension == 2 ? static_cast<std::size_t>(side) * side : side;
  lookup_.assign(table, -1);
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    const auto& k = modes_[i];
    std::size_t slot = static_cast<std::size_t>(k[0] + cutoff);
    if (dimension == 2) slot = slot * side + static_cast<std::size_t>(k[1] + cutoff);
    lookup_[slot] = static_cast<std::int32_t>(i);
  }
  hash_ = model_hash(dimension, cutoff, sobolev_s, kind);
}

std::optional<std::size_t> SpectralModel::index_of(const Mode& k) const {
  if (std::abs(k[0]) > cutoff_) return std::nullopt;
  std::size_t slot = static_cast<std::size_t>(k[0] + cutoff_);
  if (dimension_ == 2) {
    if (std::abs(k[1]) > cutoff_) return std::nullopt;
    slot = slot * (2 * cutoff_ + 1) + static_cast<std::size_t>(k[1] + cutoff_);
  } else if (k[1] != 0) {
    return std::nullopt;
  }
  const auto idx = lookup_[slot];
  if (idx < 0) return std::nullopt;
  return static_cast<std::size_t>(idx);
}

int SpectralModel::norm2(std::size_t index) const { return lattice_norm2(modes_.at(index)); }

bool SpectralModel::operator==(const SpectralModel& other) const {
  return dimension_ == other.dimension_ && cutoff_ == other.cutoff_ &&
         sobolev_s_ == other.sobolev_s_ && kind_ == other.kind_;
}

ModelPtr build_model(int dimension, int cutoff, double sobolev_s, OperatorKind kind) {
  if (dimension != 1 && dimension != 2) {
    throw ModelError("dimension must be 1 or 2, got " + std::to_string(dimension));
  }
  if (cutoff < 1) throw ModelError("cutoff N must be >= 1");
  if (!(sobolev_s >= 0.0) || !std::isfinite(sobolev_s)) {
    throw ModelError("Sobolev exponent s must be finite and >= 0");
  }
  if (kind == OperatorKind::laplacian_plus_one && sobolev_s <= dimension / 2.0 - 1.0) {
    throw ModelError("Gaussian measure undefined: need s > d/2 - 1 = " +
                     std::to_string(dimension / 2.0 - 1.0) + ", got s = " +
                     std::to_string(sobolev_s));
  }
  return std::make_shared<const SpectralModel>(dimension, cutoff, sobolev_s, kind);
}

double eigen_partial_sum(const SpectralModel& model, int cutoff) {
  const int d = model.dimension();
  const double power = -(model.sobolev_s() + 1.0);
  double sum = 0.0;
  for (int k1 = -cutoff; k1 <= cutoff; ++k1) {
    for (int k2 = (d == 2 ? -cutoff : 0); k2 <= (d == 2 ? cutoff : 0); ++k2) {
      const Mode k{k1, k2};
      if (model.kind() == OperatorKind::laplacian_mean_zero && k1 == 0 && k2 == 0) continue;
      sum += std::pow(eigenvalue_for(k, model.kind()), power);
    }
  }
  return sum;
}

Field::Field(ModelPtr m) : model(std::move(m)), coeffs(model ? model->size() : 0) {}

Field::Field(ModelPtr m, std::vector<cplx> c) : model(std::move(m)), coeffs(std::move(c)) {
  if (!model) throw ModelError("field without model");
  if (coeffs.size() != model->size()) {
    throw ModelError("coefficient count " + std::to_string(coeffs.size()) +
                     " does not match model size " + std::to_string(model->size()));
  }
}

bool Field::is_finite() const {
  return std::all_of(coeffs.begin(), coeffs.end(), [](const cplx& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

void require_same_model(const Field& a, const Field& b) {
  if (!a.model || !b.model) throw ModelError("field without model");
  if (a.model != b.model && !(*a.model == *b.model)) throw ModelError("model mismatch");
}

Field& Field::operator+=(const Field& other) {
  require_same_model(*this, other);
  for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] += other.coeffs[i];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  require_same_model(*this, other);
  for (std::size_t i = 0; i < coeffs.size(); ++i) coeffs[i] -= other.coeffs[i];
  return *this;
}

Field& Field::operator*=(cplx factor) {
  for (auto& z : coeffs) z *= factor;
  return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(cplx factor, Field a) { return a *= factor; }

Field basis_field(const ModelPtr& model, std::size_t index, cplx value) {
  Field f(model);
  f.coeffs.at(index) = value;
  return f;
}

Field dual_basis(const ModelPtr& model, std::size_t index) {
  return basis_field(model, index, std::pow(model->eigenvalue(index), model->sobolev_s() / 2.0));
}

Field predual_basis(const ModelPtr& model, std::size_t index) {
  return basis_field(model, index, std::pow(model->eigenvalue(index), -model->sobolev_s() / 2.0));
}

cplx coordinate(const Field& u, std::size_t index) {
  return u.coeffs.at(index) * std::pow(u.model->eigenvalue(index), -u.model->sobolev_s() / 2.0);
}

double sobolev_norm(const Field& u, double r) {
  const auto lambda = u.model->eigenvalues();
  double sum = 0.0;
  for (std::size_t i = 0; i < u.coeffs.size(); ++i) {
    sum += std::pow(lambda[i], r) * std::norm(u.coeffs[i]);
  }
  return std::sqrt(sum);
}

double inner_minus_s(const Field& u, const Field& w) {
  require_same_model(u, w);
  const auto lambda = u.model->eigenvalues();
  const double s = u.model->sobolev_s();
  double sum = 0.0;
  for (std::size_t i = 0; i < u.coeffs.size(); ++i) {
    sum += std::pow(lambda[i], -s) * (u.coeffs[i] * std::conj(w.coeffs[i])).real();
  }
  return sum;
}

double real_pairing(const Field& u, const Field& w) {
  require_same_model(u, w);
  double sum = 0.0;
  for (std::size_t i = 0; i < u.coeffs.size(); ++i) {
    sum += (u.coeffs[i] * std::conj(w.coeffs[i])).real();
  }
  return sum;
}

double weak_star_norm(const Field& u) {
  double sum = 0.0;
  double weight = 0.5;
  for (std::size_t i = 0; i < u.coeffs.size(); ++i) {
    sum += weight * std::abs(coordinate(u, i));
    weight *= 0.5;
  }
  return sum;
}

void apply_semigroup_inplace(std::span<cplx> coeffs, const SpectralModel& model, double t,
                             int sign) {
  const auto lambda = model.eigenvalues();
  const double dir = sign >= 0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const double phase = dir * t * lambda[i];
    coeffs[i] *= cplx(std::cos(phase), std::sin(phase));
  }
}

Field apply_semigroup(const Field& u, double t, int sign) {
  Field out = u;
  apply_semigroup_inplace(out.coeffs, *u.model, t, sign);
  return out;
}

Field project(const Field& u, std::size_t n) {
  if (n < 1 || n > u.size()) {
    throw ModelError("projection rank " + std::to_string(n) + " outside [1, " +
                     std::to_string(u.size()) + "]");
  }
  Field out = u;
  std::fill(out.coeffs.begin() + static_cast<std::ptrdiff_t>(n), out.coeffs.end(), cplx{});
  return out;
}

}  // namespace liouvlab
