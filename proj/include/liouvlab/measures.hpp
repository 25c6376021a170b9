#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "liouvlab/collocation.hpp"
#include "liouvlab/spectral.hpp"

namespace liouvlab {

/// Weighted sample cloud standing for a probability measure.
struct Ensemble {
  ModelPtr model;
  std::vector<Field> samples;
  std::vector<double> weights;
  std::uint64_t seed = 0;
  std::string label;

  std::size_t size() const { return samples.size(); }
  /// Throws ModelError if sizes, weights or models are inconsistent.
  void validate() const;
  /// First `count` samples with their weights.
  Ensemble head(std::size_t count) const;
};

enum class NonlinearityKind { none, hartree, hartree_wick, nls_power, nls_wick };
enum class PotentialKind { gaussian, bracket_power };

std::string to_string(NonlinearityKind kind);
NonlinearityKind nonlinearity_from_string(const std::string& name);
std::string to_string(PotentialKind kind);
PotentialKind potential_from_string(const std::string& name);

/// Catalogued nonlinear functional h_NL. Potentials: `gaussian` is
/// V^(k) = exp(-|k|^2), `bracket_power` is V^(k) = <k>^{-decay}.
struct NonlinearitySpec {
  NonlinearityKind kind = NonlinearityKind::none;
  int r = 1;
  PotentialKind potential = PotentialKind::gaussian;
  double potential_decay = 1.0;
  double wick_variance = 0.0;
};

/// Fills defaults (potential by dimension, cached Wick variance) and checks
/// the result against the model.
NonlinearitySpec make_nonlinearity(const SpectralModel& model, NonlinearityKind kind, int r = 2);
void validate_nonlinearity(const SpectralModel& model, const NonlinearitySpec& spec);

double potential_hat(const NonlinearitySpec& spec, const Mode& k);

/// sigma_N^2 = E |u_N(x)|^2 = (2 pi)^{-d} sum_k E|u_k|^2 under nu_0.
double wick_variance(const SpectralModel& model);

/// (-1)^r r! sigma^{2r} L_r(x / sigma^2) and its x-derivative.
std::pair<double, double> wick_power(int r, double x, double sigma2);

/// Evaluates h_NL and its real L^2 gradient on collocation grids sized to be
/// exact for the truncated fields.
class NonlinearFunctional {
 public:
  NonlinearFunctional(ModelPtr model, NonlinearitySpec spec);

  const NonlinearitySpec& spec() const { return spec_; }
  const ModelPtr& model() const { return model_; }

  double energy(const Field& u) const;
  Field gradient(const Field& u) const;

  double energy(std::span<const cplx> coeffs) const;
  void gradient(std::span<const cplx> coeffs, std::span<cplx> out) const;

  /// 1/2 Re<u, A u> + h_NL(u).
  double hamiltonian(const Field& u) const;

 private:
  ModelPtr model_;
  NonlinearitySpec spec_;
  std::unique_ptr<CollocationGrid> grid_;
  std::vector<double> vhat_;  // per grid-spectrum slot
};

/// nu_0: Re u_k, Im u_k independent N(0, 1/lambda_k). Uniform weights.
Ensemble sample_gaussian(const ModelPtr& model, std::size_t count, std::uint64_t seed);

/// Real field with theta = |D| u white noise: E|u_k|^2 = |k|^{-2},
/// u_{-k} = conj(u_k). Requires the mean-zero operator.
Ensemble sample_enstrophy_gaussian(const ModelPtr& model, std::size_t count, std::uint64_t seed);

/// Every sample shifted by `mean` (same weights); a non-centred measure.
Ensemble displaced(const Ensemble& e, const Field& mean);

struct GibbsDiagnostics {
  double ess = 0.0;
  double ess_fraction = 0.0;
  double l2_first_half = 0.0;   // mean of exp(-2 h) over first half
  double l2_second_half = 0.0;
  double l2_relative_difference = 0.0;
  bool unreliable = false;
};

struct GibbsResult {
  Ensemble ensemble;
  std::vector<double> energies;
  GibbsDiagnostics diagnostics;
};

/// Importance weights proportional to exp(-h_NL), rescaled so the largest is 1.
GibbsResult gibbs_reweight(const Ensemble& base, const NonlinearFunctional& functional);

struct ComplexEstimate {
  cplx value;
  double se = 0.0;
};

/// Weighted mean of exp(i <u, xi>_{H^{-s}_R}).
ComplexEstimate characteristic_functional(const Ensemble& e, const Field& xi);

}  // namespace liouvlab
