#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "liouvlab/cylinder.hpp"
#include "liouvlab/flows.hpp"
#include "liouvlab/measures.hpp"

namespace liouvlab {

/// v(t, u).
using VectorField = std::function<Field(double t, const Field& u)>;

/// Weighted family of curves t -> state(i, t) whose time marginals are mu_t.
/// Using the same base samples at every t gives common random numbers.
struct StateFamily {
  std::vector<double> weights;
  std::function<Field(std::size_t i, double t)> state;
  /// Optional shortcut: state at t + h from the state at t (same sample).
  std::function<Field(const Field& at_t, double t, double h)> advance;
  std::size_t size() const { return weights.size(); }
};

/// mu_t = (e^{itA})_# mu_0: the interaction-picture family of an ensemble.
StateFamily rotating_family(const Ensemble& e);
/// mu_t = (e^{-itA})_# mu_0: the linear (free) flow in the lab frame.
StateFamily free_flow_family(const Ensemble& e);
/// mu_t = mu_0 for all t.
StateFamily frozen_family(const Ensemble& e);
/// mu_t = (Phi_t)_# mu_0 for a deterministic map u -> Phi_t(u).
StateFamily transported_family(const Ensemble& e, std::function<Field(const Field&, double)> evolve);
/// Interaction-picture pushforward u -> e^{itA} Phi_t(u), Phi_t the lab-frame
/// Strang flow with step dt.
StateFamily interaction_family(const Ensemble& e, const NonlinearFunctional& functional, double dt);

/// -i e^{itA} grad h_NL(e^{-itA} u).
VectorField interaction_vector_field(const NonlinearFunctional& functional);
/// -i A u.
VectorField free_vector_field(const ModelPtr& model);
/// u -> v(u) for time-independent fields such as mSQG.
VectorField autonomous(std::function<Field(const Field&)> field);
VectorField negated(VectorField v);
/// v + drift (constant field).
VectorField drifted(VectorField v, Field drift);

struct ResidualRecord {
  std::string experiment;
  std::string estimator;  // "central_difference", "stationary", "kernel"
  std::string descriptor;
  double t = 0.0;
  double dt_fd = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double se_lhs = 0.0;
  double se_rhs = 0.0;
  double se_paired = 0.0;  // SE of the per-sample difference
  double z = 0.0;          // residual / test_se()
  double excluded_mass = 0.0;

  double combined_se() const { return std::sqrt(se_lhs * se_lhs + se_rhs * se_rhs); }
  /// Larger of the paired and combined errors. The paired one alone would
  /// resolve the deterministic O(dt^2) bias of transported families; the
  /// combined one alone is too small when the two sides anti-correlate.
  double test_se() const { return std::max(se_paired, combined_se()); }
};

/// LHS = central difference (step dt_fd) of the weighted mean of F over the
/// family; RHS = weighted mean of <v(t,u), grad F(u)>. One record per
/// (F, dt_fd) pair, F-major. The vector field is evaluated once per sample.
std::vector<ResidualRecord> liouville_residuals(const StateFamily& family, const VectorField& v,
                                                const std::vector<CylTestFunction>& tests, double t,
                                                const std::vector<double>& dt_fds);

ResidualRecord liouville_residual(const StateFamily& family, const VectorField& v, const CylTestFunction& F,
                                  double t, double dt_fd);

/// Stationary form: mean of <v(u), grad F(u)> over a fixed ensemble.
ResidualRecord stationary_residual(const Ensemble& e, const VectorField& v, const CylTestFunction& F);

struct InvarianceRow {
  std::string descriptor;
  double t = 0.0;
  double mean_initial = 0.0;
  double mean_evolved = 0.0;
  double drift = 0.0;     // mean_evolved - mean_initial
  double se = 0.0;        // paired standard error
  double z = 0.0;
  double excluded_mass = 0.0;
};

/// Optional observation frame applied to both sides, e.g. u -> e^{itA} u.
using FrameMap = std::function<Field(const Field& u, double t)>;

/// E_0[F(frame_t(u))] against E_0[F(frame_t(Phi_t u))] for each (F, t).
std::vector<InvarianceRow> invariance_check(const SampleFlow& flow, const Ensemble& e0,
                                            const std::vector<CylTestFunction>& tests,
                                            const std::vector<double>& t_grid, const FrameMap& frame = {});

struct IntegrabilityResult {
  std::vector<double> times;
  std::vector<double> inner_mean;  // weighted mean of ||v(t,u)||_{H^{-s}} under mu_t
  std::vector<double> inner_se;
  double value = 0.0;              // trapezoid of inner_mean / omega(|t|)
  double inner_spread_z = 0.0;     // max |inner(t) - inner(t0)| / combined SE
  bool inner_constant = true;      // spread within 3 SE
};

IntegrabilityResult integrability_estimate(const StateFamily& family, const VectorField& v,
                                           const std::vector<double>& t_grid,
                                           const std::function<double(double)>& omega);

/// Trapezoid of values / omega(|t|) restricted to |t| <= window.
double windowed_integral(const std::vector<double>& times, const std::vector<double>& values,
                         const std::function<double(double)>& omega, double window);

double bracket_squared(double t);  // <t>^2 = 1 + t^2

/// Weighted mean of min(norm, clip) for each clip level.
std::vector<double> clipped_sweep(std::span<const double> norms, std::span<const double> weights,
                                  std::span<const double> clips);

/// Clipped sweep of ||v(0,(q,p))|| for the counter-example field under the
/// standard Gaussian, on a tensor quadrature grid of the given spacing over
/// [-extent, extent]^2 (deterministic; resolves the far tail).
std::vector<double> counterexample_clipped_sweep(std::span<const double> clips, double spacing = 0.01,
                                                 double extent = 10.0);

struct FractionEstimate {
  double fraction = 0.0;
  double se = 0.0;
  double excluded_mass = 0.0;
};

/// Weighted fraction of samples surviving to the horizon.
FractionEstimate global_fraction(const Ensemble& e, const SampleFlow& flow, double horizon);

struct CounterexampleStats {
  std::size_t count = 0;
  double q_blowup_fraction = 0.0;    // q crosses the guard before T
  double nonglobal_fraction = 0.0;   // q blowup or p escape before T
  double q_blowup_se = 0.0;
  double nonglobal_se = 0.0;
  std::vector<double> blowup_times;  // bracket lower ends of q blowups
};

/// Standard Gaussian (q0, p0) ensemble integrated to T.
CounterexampleStats counterexample_statistics(std::size_t count, std::uint64_t seed, double horizon,
                                              const CounterexampleOptions& options = {});

struct OdeFractionResult {
  double fraction = 0.0;
  double singular_mass = 0.0;  // weight lost to singularity approach
  double overflow_mass = 0.0;
  double max_energy_drift = 0.0;
};

OdeFractionResult ode_global_fraction(const OdeHamiltonianSpec& spec, const PointEnsemble& e, double horizon,
                                      double dt);

}  // namespace liouvlab
