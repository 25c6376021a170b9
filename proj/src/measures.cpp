#include "liouvlab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "liouvlab/parallel.hpp"
#include "liouvlab/rng.hpp"
#include "liouvlab/stats.hpp"

namespace liouvlab {

void Ensemble::validate() const {
  if (!model) throw ModelError("ensemble without model");
  if (samples.size() != weights.size()) throw ModelError("ensemble: weights/samples length mismatch");
  if (samples.empty()) throw ModelError("ensemble is empty");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ModelError("ensemble: negative or non-finite weight");
    total += w;
  }
  if (!(total > 0.0)) throw ModelError("ensemble: weights sum to zero");
  for (const auto& f : samples) {
    if (f.model != model && !(*f.model == *model)) throw ModelError("ensemble: sample on a different model");
    if (f.size() != model->size()) throw ModelError("ensemble: sample has wrong length");
  }
}

Ensemble Ensemble::head(std::size_t count) const {
  Ensemble out{model, {}, {}, seed, label};
  count = std::min(count, samples.size());
  out.samples.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(count));
  out.weights.assign(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

Ensemble displaced(const Ensemble& e, const Field& mean) {
  Ensemble out = e;
  for (auto& u : out.samples) u += mean;
  out.label = e.label + "+shift";
  return out;
}

std::string to_string(NonlinearityKind kind) {
  switch (kind) {
    case NonlinearityKind::none: return "none";
    case NonlinearityKind::hartree: return "hartree";
    case NonlinearityKind::hartree_wick: return "hartree_wick";
    case NonlinearityKind::nls_power: return "nls_power";
    case NonlinearityKind::nls_wick: return "nls_wick";
  }
  return "unknown";
}

NonlinearityKind nonlinearity_from_string(const std::string& name) {
  for (auto k : {NonlinearityKind::none, NonlinearityKind::hartree, NonlinearityKind::hartree_wick,
                 NonlinearityKind::nls_power, NonlinearityKind::nls_wick}) {
    if (to_string(k) == name) return k;
  }
  throw ModelError("unknown nonlinearity '" + name + "'");
}

std::string to_string(PotentialKind kind) {
  return kind == PotentialKind::gaussian ? "gaussian" : "bracket_power";
}

PotentialKind potential_from_string(const std::string& name) {
  if (name == "gaussian") return PotentialKind::gaussian;
  if (name == "bracket_power") return PotentialKind::bracket_power;
  throw ModelError("unknown potential '" + name + "'");
}

double potential_hat(const NonlinearitySpec& spec, const Mode& k) {
  const double k2 = static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1];
  if (spec.potential == PotentialKind::gaussian) return std::exp(-k2);
  return std::pow(1.0 + k2, -0.5 * spec.potential_decay);
}

double wick_variance(const SpectralModel& model) {
  if (model.kind() != OperatorKind::laplacian_plus_one) {
    throw ModelError("Wick variance needs the laplacian_plus_one operator");
  }
  double sum = 0.0;
  for (double lambda : model.eigenvalues()) sum += 2.0 / lambda;
  return sum * std::pow(2.0 * std::numbers::pi, -model.dimension());
}

std::pair<double, double> wick_power(int r, double x, double sigma2) {
  const double z = x / sigma2;
  double l_prev = 1.0, l_cur = 1.0 - z;
  double d_prev = 0.0, d_cur = -1.0;
  if (r == 0) return {1.0, 0.0};
  for (int k = 1; k < r; ++k) {
    const double l_next = ((2 * k + 1 - z) * l_cur - k * l_prev) / (k + 1);
    const double d_next = ((2 * k + 1 - z) * d_cur - l_cur - k * d_prev) / (k + 1);
    l_prev = l_cur;
    l_cur = l_next;
    d_prev = d_cur;
    d_cur = d_next;
  }
  double factor = std::pow(sigma2, r);
  for (int k = 2; k <= r; ++k) factor *= k;
  if (r % 2) factor = -factor;
  return {factor * l_cur, factor / sigma2 * d_cur};
}

void validate_nonlinearity(const SpectralModel& model, const NonlinearitySpec& spec) {
  if (spec.r < 1) throw ModelError("nonlinearity power r must be >= 1");
  if (!(spec.potential_decay >= 0.0)) throw ModelError("potential decay must be >= 0");
  const bool wick = spec.kind == NonlinearityKind::hartree_wick || spec.kind == NonlinearityKind::nls_wick;
  if (wick) {
    if (model.kind() != OperatorKind::laplacian_plus_one) {
      throw ModelError("Wick-ordered nonlinearities need the laplacian_plus_one operator");
    }
    if (!(spec.wick_variance > 0.0)) throw ModelError("Wick variance not set");
  }
  if (spec.kind == NonlinearityKind::hartree_wick && model.dimension() == 2 &&
      spec.potential == PotentialKind::bracket_power && !(spec.potential_decay > 0.0)) {
    throw ModelError("hartree_wick in d=2 needs V^(k) <= C <k>^{-eps} with eps > 0");
  }
}

NonlinearitySpec make_nonlinearity(const SpectralModel& model, NonlinearityKind kind, int r) {
  NonlinearitySpec spec;
  spec.kind = kind;
  spec.r = r;
  spec.potential = model.dimension() == 1 ? PotentialKind::gaussian : PotentialKind::bracket_power;
  spec.potential_decay = 1.0;
  if (kind == NonlinearityKind::hartree_wick || kind == NonlinearityKind::nls_wick) {
    spec.wick_variance = wick_variance(model);
  }
  validate_nonlinearity(model, spec);
  return spec;
}

NonlinearFunctional::NonlinearFunctional(ModelPtr model, NonlinearitySpec spec)
    : model_(std::move(model)), spec_(spec) {
  validate_nonlinearity(*model_, spec_);
  const int base = 2 * model_->cutoff() + 1;
  switch (spec_.kind) {
    case NonlinearityKind::none: return;
    case NonlinearityKind::hartree:
    case NonlinearityKind::hartree_wick:
      grid_ = std::make_unique<CollocationGrid>(*model_, 2 * base);
      vhat_.resize(grid_->size());
      for (std::size_t slot = 0; slot < grid_->size(); ++slot) {
        vhat_[slot] = potential_hat(spec_, grid_->slot_mode(slot));
      }
      return;
    case NonlinearityKind::nls_power:
    case NonlinearityKind::nls_wick:
      grid_ = std::make_unique<CollocationGrid>(*model_, std::max(2, spec_.r) * base);
      return;
  }
}

double NonlinearFunctional::energy(const Field& u) const {
  require_same_model(u, Field(model_));
  return energy(std::span<const cplx>(u.coeffs));
}

Field NonlinearFunctional::gradient(const Field& u) const {
  require_same_model(u, Field(model_));
  Field out(model_);
  gradient(u.coeffs, out.coeffs);
  return out;
}

double NonlinearFunctional::energy(std::span<const cplx> coeffs) const {
  if (spec_.kind == NonlinearityKind::none) return 0.0;
  std::vector<cplx> g(grid_->size());
  grid_->to_grid(coeffs, g);
  const double sigma2 = spec_.wick_variance;
  switch (spec_.kind) {
    case NonlinearityKind::hartree:
    case NonlinearityKind::hartree_wick: {
      const double shift = spec_.kind == NonlinearityKind::hartree_wick ? sigma2 : 0.0;
      for (auto& z : g) z = std::norm(z) - shift;
      grid_->forward(g);
      const double scale = grid_->forward_scale();
      double sum = 0.0;
      for (std::size_t slot = 0; slot < g.size(); ++slot) sum += vhat_[slot] * std::norm(g[slot] * scale);
      return 0.25 * sum;
    }
    case NonlinearityKind::nls_power: {
      double sum = 0.0;
      for (const auto& z : g) sum += std::pow(std::norm(z), spec_.r);
      return sum * grid_->cell_volume() / (2.0 * spec_.r);
    }
    case NonlinearityKind::nls_wick: {
      double sum = 0.0;
      for (const auto& z : g) sum += wick_power(spec_.r, std::norm(z), sigma2).first;
      return sum * grid_->cell_volume() / (2.0 * spec_.r);
    }
    case NonlinearityKind::none: break;
  }
  return 0.0;
}

void NonlinearFunctional::gradient(std::span<const cplx> coeffs, std::span<cplx> out) const {
  if (spec_.kind == NonlinearityKind::none) {
    std::fill(out.begin(), out.end(), cplx{});
    return;
  }
  std::vector<cplx> g(grid_->size());
  grid_->to_grid(coeffs, g);
  const double sigma2 = spec_.wick_variance;
  switch (spec_.kind) {
    case NonlinearityKind::hartree:
    case NonlinearityKind::hartree_wick: {
      const double shift = spec_.kind == NonlinearityKind::hartree_wick ? sigma2 : 0.0;
      std::vector<cplx> conv(g.size());
      for (std::size_t j = 0; j < g.size(); ++j) conv[j] = std::norm(g[j]) - shift;
      grid_->forward(conv);
      // V * rho on the grid: orthonormal coefficients V^ rho^, resynthesised
      const double scale = grid_->forward_scale() * grid_->backward_scale();
      for (std::size_t slot = 0; slot < conv.size(); ++slot) conv[slot] *= vhat_[slot] * scale;
      grid_->backward(conv);
      for (std::size_t j = 0; j < g.size(); ++j) g[j] *= conv[j].real();
      break;
    }
    case NonlinearityKind::nls_power:
      if (spec_.r > 1) {
        for (auto& z : g) z *= std::pow(std::norm(z), spec_.r - 1);
      }
      break;
    case NonlinearityKind::nls_wick:
      for (auto& z : g) z *= wick_power(spec_.r, std::norm(z), sigma2).second / spec_.r;
      break;
    case NonlinearityKind::none: break;
  }
  grid_->from_grid(g, out);
}

double NonlinearFunctional::hamiltonian(const Field& u) const {
  const auto lambda = model_->eigenvalues();
  double quad = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) quad += lambda[i] * std::norm(u.coeffs[i]);
  return 0.5 * quad + energy(u);
}

Ensemble sample_gaussian(const ModelPtr& model, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw ModelError("sample count must be >= 1");
  Ensemble e{model, std::vector<Field>(count, Field(model)), std::vector<double>(count, 1.0), seed, "nu0"};
  const CounterRng rng(seed, 0);
  const auto lambda = model->eigenvalues();
  parallel_for(count, [&](std::size_t i) {
    auto& c = e.samples[i].coeffs;
    for (std::size_t k = 0; k < c.size(); ++k) {
      const auto [a, b] = rng.normal2(i, static_cast<std::uint32_t>(k));
      c[k] = cplx(a, b) / std::sqrt(lambda[k]);
    }
  });
  return e;
}

Ensemble sample_enstrophy_gaussian(const ModelPtr& model, std::size_t count, std::uint64_t seed) {
  if (model->kind() != OperatorKind::laplacian_mean_zero) {
    throw ModelError("enstrophy Gaussian needs the mean-zero operator");
  }
  if (count < 1) throw ModelError("sample count must be >= 1");
  Ensemble e{model, std::vector<Field>(count, Field(model)), std::vector<double>(count, 1.0), seed,
             "enstrophy"};
  const CounterRng rng(seed, 1);
  const auto modes = model->modes();
  std::vector<std::size_t> partner(model->size());
  for (std::size_t k = 0; k < modes.size(); ++k) {
    partner[k] = *model->index_of({-modes[k][0], -modes[k][1]});
  }
  parallel_for(count, [&](std::size_t i) {
    auto& c = e.samples[i].coeffs;
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (!(modes[k] > modes[partner[k]])) continue;
      const auto [a, b] = rng.normal2(i, static_cast<std::uint32_t>(k));
      const double scale = 1.0 / (std::numbers::sqrt2 * std::sqrt(model->norm2(k)));
      c[k] = cplx(a, b) * scale;
      c[partner[k]] = std::conj(c[k]);
    }
  });
  return e;
}

GibbsResult gibbs_reweight(const Ensemble& base, const NonlinearFunctional& functional) {
  base.validate();
  const std::size_t n = base.size();
  GibbsResult result;
  result.energies.resize(n);
  parallel_for(n, [&](std::size_t i) { result.energies[i] = functional.energy(base.samples[i]); });
  for (double h : result.energies) {
    if (!std::isfinite(h)) throw ModelError("gibbs_reweight: non-finite energy");
  }
  const double h_min = *std::min_element(result.energies.begin(), result.energies.end());
  result.ensemble = base;
  result.ensemble.label = "gibbs-" + to_string(functional.spec().kind);
  for (std::size_t i = 0; i < n; ++i) {
    result.ensemble.weights[i] = base.weights[i] * std::exp(-(result.energies[i] - h_min));
  }
  auto& diag = result.diagnostics;
  diag.ess = effective_sample_size(result.ensemble.weights);
  diag.ess_fraction = diag.ess / static_cast<double>(n);
  diag.unreliable = diag.ess < 0.01 * static_cast<double>(n);

  // L^2 membership of the density: mean exp(-2h) on each half, in log space
  auto half_mean = [&](std::size_t lo, std::size_t hi) {
    if (hi <= lo) return 0.0;
    std::vector<double> terms(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) terms[i - lo] = std::exp(-2.0 * (result.energies[i] - h_min));
    return std::log(pairwise_sum(terms) / static_cast<double>(hi - lo)) - 2.0 * h_min;
  };
  const double log_first = half_mean(0, n / 2);
  const double log_second = half_mean(n / 2, n);
  diag.l2_first_half = std::exp(log_first);
  diag.l2_second_half = std::exp(log_second);
  diag.l2_relative_difference = n >= 2 ? std::abs(std::expm1(log_second - log_first)) : 0.0;
  return result;
}

ComplexEstimate characteristic_functional(const Ensemble& e, const Field& xi) {
  e.validate();
  require_same_model(e.samples.front(), xi);
  const auto lambda = e.model->eigenvalues();
  const double s = e.model->sobolev_s();
  std::vector<double> re(e.size()), im(e.size());
  parallel_for(e.size(), [&](std::size_t i) {
    double pairing = 0.0;
    const auto& c = e.samples[i].coeffs;
    for (std::size_t k = 0; k < c.size(); ++k) {
      pairing += std::pow(lambda[k], -s) * (c[k] * std::conj(xi.coeffs[k])).real();
    }
    re[i] = std::cos(pairing);
    im[i] = std::sin(pairing);
  });
  const auto mr = weighted_mean(re, e.weights);
  const auto mi = weighted_mean(im, e.weights);
  return {cplx(mr.mean, mi.mean), std::hypot(mr.se, mi.se)};
}

}  // namespace liouvlab
