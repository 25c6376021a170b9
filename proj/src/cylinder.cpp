#include "liouvlab/cylinder.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace liouvlab {

std::string to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::gauss_bump: return "gauss_bump";
    case ProfileKind::sine: return "sine";
    case ProfileKind::smooth_bump: return "smooth_bump";
  }
  return "unknown";
}

ProfileKind profile_from_string(const std::string& name) {
  for (auto k : {ProfileKind::gauss_bump, ProfileKind::sine, ProfileKind::smooth_bump}) {
    if (to_string(k) == name) return k;
  }
  throw ModelError("unknown test-function profile '" + name + "'");
}

namespace {

// b(z) = exp(1 - 1/(1 - z^2)), with b'(z) = b(z) * (-2z / (1 - z^2)^2)
std::pair<double, double> bump(double z) {
  const double w = 1.0 - z * z;
  if (w <= 0.0) return {0.0, 0.0};
  const double b = std::exp(1.0 - 1.0 / w);
  return {b, b * (-2.0 * z / (w * w))};
}

double scale_of(const SpectralModel& m, std::size_t k) { return std::pow(m.eigenvalue(k), -m.sobolev_s() / 2.0); }

}  // namespace

CylTestFunction::CylTestFunction(std::vector<Coord> coords, ProfileKind profile, std::vector<double> a,
                                 std::vector<double> c)
    : coords_(std::move(coords)), profile_(profile), a_(std::move(a)), c_(std::move(c)) {
  if (coords_.empty()) throw ModelError("test function needs at least one coordinate");
  if (a_.size() != coords_.size()) throw ModelError("test function: need one coefficient a_j per coordinate");
  if (c_.empty()) c_.assign(profile_ == ProfileKind::sine ? 1 : coords_.size(), 0.0);
  if (profile_ == ProfileKind::sine) {
    if (c_.size() != 1) throw ModelError("sine profile takes a single phase c_0");
  } else if (c_.size() != coords_.size()) {
    throw ModelError("test function: need one centre c_j per coordinate");
  }
  for (double x : a_) {
    if (!std::isfinite(x)) throw ModelError("test function: non-finite coefficient");
    if (profile_ != ProfileKind::sine && !(x > 0.0)) throw ModelError("bump widths a_j must be > 0");
  }
  // probe point slightly off the centre so every derivative is exercised
  std::vector<double> probe(coords_.size());
  for (std::size_t j = 0; j < probe.size(); ++j) {
    const double centre = profile_ == ProfileKind::sine ? 0.0 : c_[j];
    const double width = profile_ == ProfileKind::smooth_bump ? 0.3 / a_[j] : 0.3;
    probe[j] = centre + width * (j % 2 ? -1.0 : 1.0) * (1.0 + 0.1 * static_cast<double>(j));
  }
  if (gradient_check(probe, 1e-5) > 1e-6) throw ModelError("test function gradient fails its finite-difference check");
}

std::size_t CylTestFunction::max_mode() const {
  std::size_t m = 0;
  for (const auto& c : coords_) m = std::max(m, c.mode);
  return m;
}

double CylTestFunction::phi(std::span<const double> y) const {
  switch (profile_) {
    case ProfileKind::gauss_bump: {
      double s = 0.0;
      for (std::size_t j = 0; j < y.size(); ++j) s += a_[j] * (y[j] - c_[j]) * (y[j] - c_[j]);
      return std::exp(-s);
    }
    case ProfileKind::sine: {
      double s = c_[0];
      for (std::size_t j = 0; j < y.size(); ++j) s += a_[j] * y[j];
      return std::sin(s);
    }
    case ProfileKind::smooth_bump: {
      double prod = 1.0;
      for (std::size_t j = 0; j < y.size() && prod != 0.0; ++j) prod *= bump(a_[j] * (y[j] - c_[j])).first;
      return prod;
    }
  }
  return 0.0;
}

void CylTestFunction::phi_gradient(std::span<const double> y, std::span<double> grad) const {
  switch (profile_) {
    case ProfileKind::gauss_bump: {
      const double value = phi(y);
      for (std::size_t j = 0; j < y.size(); ++j) grad[j] = -2.0 * a_[j] * (y[j] - c_[j]) * value;
      return;
    }
    case ProfileKind::sine: {
      double s = c_[0];
      for (std::size_t j = 0; j < y.size(); ++j) s += a_[j] * y[j];
      const double cs = std::cos(s);
      for (std::size_t j = 0; j < y.size(); ++j) grad[j] = a_[j] * cs;
      return;
    }
    case ProfileKind::smooth_bump: {
      std::vector<std::pair<double, double>> parts(y.size());
      for (std::size_t j = 0; j < y.size(); ++j) parts[j] = bump(a_[j] * (y[j] - c_[j]));
      for (std::size_t j = 0; j < y.size(); ++j) {
        double g = a_[j] * parts[j].second;
        for (std::size_t i = 0; i < y.size(); ++i) {
          if (i != j) g *= parts[i].first;
        }
        grad[j] = g;
      }
      return;
    }
  }
}

std::vector<double> CylTestFunction::coordinates(const Field& u) const {
  std::vector<double> y(coords_.size());
  for (std::size_t j = 0; j < coords_.size(); ++j) {
    if (coords_[j].mode >= u.size()) throw ModelError("test function index out of range for the model");
    const cplx z = coordinate(u, coords_[j].mode);
    y[j] = coords_[j].part == Part::re ? z.real() : z.imag();
  }
  return y;
}

double CylTestFunction::eval(const Field& u) const { return phi(coordinates(u)); }

Field CylTestFunction::grad(const Field& u) const {
  const auto y = coordinates(u);
  std::vector<double> g(y.size());
  phi_gradient(y, g);
  Field out(u.model);
  for (std::size_t j = 0; j < coords_.size(); ++j) {
    const double sc = scale_of(*u.model, coords_[j].mode);
    out.coeffs[coords_[j].mode] += coords_[j].part == Part::re ? cplx(g[j] * sc, 0.0) : cplx(0.0, g[j] * sc);
  }
  return out;
}

double CylTestFunction::directional(const Field& u, const Field& v) const {
  const auto y = coordinates(u);
  std::vector<double> g(y.size());
  phi_gradient(y, g);
  double s = 0.0;
  for (std::size_t j = 0; j < coords_.size(); ++j) {
    const cplx z = coordinate(v, coords_[j].mode);
    s += g[j] * (coords_[j].part == Part::re ? z.real() : z.imag());
  }
  return s;
}

std::string CylTestFunction::descriptor() const {
  std::ostringstream os;
  os << to_string(profile_) << "(";
  for (std::size_t j = 0; j < coords_.size(); ++j) {
    if (j) os << ",";
    os << coords_[j].mode << (coords_[j].part == Part::re ? "re" : "im");
  }
  os << ";a=";
  for (std::size_t j = 0; j < a_.size(); ++j) os << (j ? ":" : "") << a_[j];
  os << ";c=";
  for (std::size_t j = 0; j < c_.size(); ++j) os << (j ? ":" : "") << c_[j];
  os << ")";
  return os.str();
}

double CylTestFunction::gradient_check(std::span<const double> y, double eps) const {
  std::vector<double> g(y.size()), yp(y.begin(), y.end()), ym(y.begin(), y.end());
  phi_gradient(y, g);
  double worst = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    yp[j] = y[j] + eps;
    ym[j] = y[j] - eps;
    const double fd = (phi(yp) - phi(ym)) / (2.0 * eps);
    worst = std::max(worst, std::abs(fd - g[j]));
    yp[j] = ym[j] = y[j];
  }
  return worst;
}

std::vector<CylTestFunction> standard_catalog(const SpectralModel& model) {
  if (model.size() < 3) throw ModelError("standard catalog needs at least three modes");
  using P = Part;
  std::vector<CylTestFunction> out;
  out.emplace_back(std::vector<Coord>{{0, P::re}, {0, P::im}, {1, P::re}, {1, P::im}, {2, P::re}, {2, P::im}},
                   ProfileKind::gauss_bump, std::vector<double>(6, 0.5),
                   std::vector<double>{0.8, 0.0, 0.6, 0.0, 0.6, 0.0});
  out.emplace_back(std::vector<Coord>{{0, P::re}, {1, P::re}, {2, P::re}}, ProfileKind::sine,
                   std::vector<double>{1.0, 1.0, 1.0}, std::vector<double>{0.5});
  out.emplace_back(std::vector<Coord>{{0, P::re}, {0, P::im}, {1, P::re}, {2, P::re}}, ProfileKind::sine,
                   std::vector<double>{0.7, -0.7, 1.2, 1.2}, std::vector<double>{0.0});
  out.emplace_back(std::vector<Coord>{{0, P::re}, {1, P::re}, {2, P::im}}, ProfileKind::smooth_bump,
                   std::vector<double>{0.4, 0.4, 0.4}, std::vector<double>{0.5, 0.5, 0.5});
  out.emplace_back(std::vector<Coord>{{1, P::re}, {1, P::im}, {2, P::re}, {2, P::im}, {0, P::re}},
                   ProfileKind::gauss_bump, std::vector<double>{0.6, 0.6, 0.6, 0.6, 0.3},
                   std::vector<double>{0.5, 0.5, 0.5, -0.5, 0.7});
  return out;
}

}  // namespace liouvlab
