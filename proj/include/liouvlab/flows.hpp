#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "liouvlab/collocation.hpp"
#include "liouvlab/measures.hpp"
#include "liouvlab/trajectory.hpp"

namespace liouvlab {

// ---------------------------------------------------------------- ODE example

enum class PhiKind { quadratic, quartic };

/// h(q,p) = phi(p) + |q|^2 + singular * |q|^{-alpha} on R^d x R^d, with
/// phi(p) = |p|^2 (quadratic) or |p|^2 + |p|^4 / 4 (quartic).
struct OdeHamiltonianSpec {
  int d = 5;
  PhiKind phi_kind = PhiKind::quadratic;
  double alpha = 0.25;
  double beta = 1.0;
  bool singular = true;

  /// Throws ModelError unless 0 < alpha < d/2 - 2 (when singular) and beta > 0.
  void validate() const;
};

double ode_energy(const OdeHamiltonianSpec& spec, std::span<const double> x);

struct OdeRunOptions {
  double overflow_guard = 1e8;
  double singular_guard = 1e-8;
  std::size_t record_stride = 1;  // record every k-th step (0: endpoints only)
};

/// Stormer-Verlet on q' = dh/dp, p' = -dh/dq, x = (q, p). Negative t_end
/// integrates backwards. Leaving the guards closes the run with a blowup
/// record; "singularity approach" when |q| < singular_guard.
OdeTrajectory integrate_hamiltonian_ode(const OdeHamiltonianSpec& spec, std::span<const double> x0,
                                        double t_end, double dt, const OdeRunOptions& options = {});

/// Weighted cloud in R^{2d}.
struct PointEnsemble {
  std::vector<std::vector<double>> points;
  std::vector<double> weights;
  std::uint64_t seed = 0;
};

/// Gibbs measure exp(-beta h) by importance sampling from the Gaussian
/// exp(-beta (|q|^2 + |p|^2)).
PointEnsemble sample_ode_gibbs(const OdeHamiltonianSpec& spec, std::size_t count, std::uint64_t seed);

// ------------------------------------------------------ Hamiltonian PDEs (NLS)

struct FieldRunOptions {
  double norm_guard = 1e8;
  std::size_t record_stride = 0;  // 0: endpoints only
  bool log_invariants = true;
};

/// Strang splitting for i u' = A u + grad h_NL(u): exact half-steps of the
/// linear part, implicit midpoint (fixed point) on u' = -i grad h_NL(u).
/// Logged invariants: "mass" = sum |u_k|^2, "hamiltonian".
Trajectory integrate_interaction(const NonlinearFunctional& functional, const Field& u0,
                                 double t_end, double dt, const FieldRunOptions& options = {});

/// Lab-frame state after time t (no logging).
Field advance_interaction(const NonlinearFunctional& functional, const Field& u0, double t, double dt);

// ----------------------------------------------------------------------- mSQG

/// Galerkin-truncated mSQG field v(u) = -|D|^{-1} P_N (phi . grad) |D| u with
/// phi = grad^perp |D|^{-delta} u, evaluated without aliasing on a padded grid.
class MsqgField {
 public:
  MsqgField(ModelPtr model, double delta);

  const ModelPtr& model() const { return model_; }
  double delta() const { return delta_; }

  void evaluate(std::span<const cplx> u, std::span<cplx> out) const;
  Field operator()(const Field& u) const;

  /// Largest |phi| on the grid; drives the step-size guard.
  double max_transport_speed(std::span<const cplx> u) const;
  /// Largest admissible RK4 step for state u.
  double stable_dt(std::span<const cplx> u) const;

  /// sum |k|^2 |u_k|^2 and sum |k|^{1-delta} |u_k|^2.
  double enstrophy(const Field& u) const;
  double energy(const Field& u) const;

 private:
  ModelPtr model_;
  double delta_;
  std::unique_ptr<CollocationGrid> grid_;
  std::vector<double> abs_k_;
};

class StepSizeError : public std::runtime_error {
 public:
  StepSizeError(const std::string& what, double required) : std::runtime_error(what), required_dt(required) {}
  double required_dt;
};

/// Classical RK4; refuses (StepSizeError) a dt above the stability estimate
/// of the initial state. Logs "enstrophy" and "energy".
Trajectory integrate_msqg(const MsqgField& field, const Field& u0, double t_end, double dt,
                          const FieldRunOptions& options = {});

// ------------------------------------------------------------ counter-example

/// v(q,p) = (q^2, (2q - q^3) e^{p^2/2} int_p^inf e^{-s^2/2} ds).
std::array<double, 2> counterexample_field(double q, double p);

struct CounterexampleOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double q_guard = 1e8;
  double p_escape = 30.0;
  std::size_t record_stride = 0;
};

struct CounterexampleRun {
  OdeTrajectory trajectory;          // blowup = q crossing the guard
  std::optional<double> p_escape_time;  // p -> -infinity detected
  std::size_t steps = 0;

  bool q_blowup_before(double t) const { return trajectory.blowup && trajectory.blowup->time_lower < t; }
  bool non_global_before(double t) const {
    return q_blowup_before(t) || (p_escape_time && *p_escape_time < t);
  }
};

/// Adaptive Dormand-Prince RK45 from t = 0.
CounterexampleRun integrate_counterexample(double q0, double p0, double t_end,
                                           const CounterexampleOptions& options = {});

/// Closed-form probability (standard Gaussian (q0,p0)) that either component
/// escapes before T.
double counterexample_nonglobal_probability(double horizon);

// -------------------------------------------------------------- pushforward

/// Maps a sample to its state at time t; returns nullopt if the trajectory
/// left the admissible region first.
using SampleFlow = std::function<std::optional<Field>(const Field& u0, double t)>;

struct PushforwardResult {
  Ensemble ensemble;            // weights carried unchanged
  std::vector<char> excluded;   // 1 where the sample blew up
  double excluded_mass = 0.0;   // fraction of total weight excluded

  /// Weights with excluded samples zeroed.
  std::vector<double> active_weights() const;
};

PushforwardResult pushforward(const Ensemble& e, const SampleFlow& flow, double t);

SampleFlow linear_flow();  // u -> e^{-itA} u
SampleFlow interaction_flow(const NonlinearFunctional& functional, double dt);
SampleFlow msqg_flow(const MsqgField& field, double dt);

}  // namespace liouvlab
