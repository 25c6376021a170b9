#include "liouvlab/flows.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "liouvlab/parallel.hpp"
#include "liouvlab/rng.hpp"
#include "liouvlab/special.hpp"
#include "liouvlab/stats.hpp"

namespace liouvlab {

namespace {

std::size_t step_count(double t_end, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ModelError("time step dt must be positive and finite");
  if (!std::isfinite(t_end)) throw ModelError("t_end must be finite");
  return static_cast<std::size_t>(std::ceil(std::abs(t_end) / dt - 1e-9));
}

bool should_record(std::size_t step, std::size_t total, std::size_t stride) {
  if (step == total) return true;
  return stride > 0 && step % stride == 0;
}

double norm2_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

// ---------------------------------------------------------------- ODE example

void OdeHamiltonianSpec::validate() const {
  if (d < 1) throw ModelError("ODE dimension d must be >= 1");
  if (!(beta > 0.0)) throw ModelError("beta must be > 0");
  if (singular) {
    if (!(alpha > 0.0)) throw ModelError("alpha must be > 0");
    if (!(alpha < d / 2.0 - 2.0)) {
      throw ModelError("singular example needs alpha < d/2 - 2 = " + std::to_string(d / 2.0 - 2.0));
    }
  }
}

namespace {

double phi_value(const OdeHamiltonianSpec& spec, double p2) {
  return spec.phi_kind == PhiKind::quadratic ? p2 : p2 + 0.25 * p2 * p2;
}

void kinetic_gradient(const OdeHamiltonianSpec& spec, std::span<const double> p, std::span<double> out) {
  const double factor = spec.phi_kind == PhiKind::quadratic ? 2.0 : 2.0 + norm2_of(p);
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = factor * p[i];
}

void potential_gradient(const OdeHamiltonianSpec& spec, std::span<const double> q, std::span<double> out) {
  double factor = 2.0;
  if (spec.singular) factor -= spec.alpha * std::pow(norm2_of(q), -0.5 * spec.alpha - 1.0);
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = factor * q[i];
}

}  // namespace

double ode_energy(const OdeHamiltonianSpec& spec, std::span<const double> x) {
  const std::size_t d = static_cast<std::size_t>(spec.d);
  const double q2 = norm2_of(x.first(d));
  const double p2 = norm2_of(x.subspan(d, d));
  double h = phi_value(spec, p2) + q2;
  if (spec.singular) h += std::pow(q2, -0.5 * spec.alpha);
  return h;
}

OdeTrajectory integrate_hamiltonian_ode(const OdeHamiltonianSpec& spec, std::span<const double> x0,
                                        double t_end, double dt, const OdeRunOptions& options) {
  spec.validate();
  const std::size_t d = static_cast<std::size_t>(spec.d);
  if (x0.size() != 2 * d) throw ModelError("initial state must have 2d components");
  if (spec.singular && norm2_of(x0.first(d)) == 0.0) throw ModelError("initial q must be nonzero");
  const std::size_t n = step_count(t_end, dt);
  const double h = n > 0 ? t_end / static_cast<double>(n) : 0.0;

  OdeTrajectory traj;
  traj.invariant_names = {"energy"};
  std::vector<double> x(x0.begin(), x0.end());
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.invariants.push_back({ode_energy(spec, x)});
  };
  record(0.0);

  std::vector<double> grad(d);
  std::span<double> q(x.data(), d), p(x.data() + d, d);
  for (std::size_t step = 1; step <= n; ++step) {
    const double t_prev = h * static_cast<double>(step - 1);
    const double t = h * static_cast<double>(step);
    potential_gradient(spec, q, grad);
    for (std::size_t i = 0; i < d; ++i) p[i] -= 0.5 * h * grad[i];
    kinetic_gradient(spec, p, grad);
    for (std::size_t i = 0; i < d; ++i) q[i] += h * grad[i];
    const double q2 = norm2_of(q);
    if (spec.singular && std::sqrt(q2) < options.singular_guard) {
      traj.blowup = Blowup{std::min(t_prev, t), std::max(t_prev, t), t, "singularity approach"};
      return traj;
    }
    potential_gradient(spec, q, grad);
    for (std::size_t i = 0; i < d; ++i) p[i] -= 0.5 * h * grad[i];

    const double size = std::sqrt(norm2_of(x));
    if (!std::isfinite(size) || size > options.overflow_guard) {
      traj.blowup = Blowup{std::min(t_prev, t), std::max(t_prev, t), t, "overflow"};
      return traj;
    }
    if (should_record(step, n, options.record_stride)) record(t);
  }
  if (n == 0) return traj;
  return traj;
}

PointEnsemble sample_ode_gibbs(const OdeHamiltonianSpec& spec, std::size_t count, std::uint64_t seed) {
  spec.validate();
  const std::size_t d = static_cast<std::size_t>(spec.d);
  PointEnsemble e;
  e.seed = seed;
  e.points.assign(count, std::vector<double>(2 * d));
  e.weights.assign(count, 0.0);
  const CounterRng rng(seed, 2);
  const double sd = 1.0 / std::sqrt(2.0 * spec.beta);
  parallel_for(count, [&](std::size_t i) {
    auto& x = e.points[i];
    for (std::size_t j = 0; j < d; ++j) {
      const auto [a, b] = rng.normal2(i, static_cast<std::uint32_t>(j));
      x[j] = sd * a;
      x[d + j] = sd * b;
    }
    const double q2 = norm2_of(std::span<const double>(x).first(d));
    const double p2 = norm2_of(std::span<const double>(x).subspan(d));
    double excess = phi_value(spec, p2) - p2;
    if (spec.singular) excess += std::pow(q2, -0.5 * spec.alpha);
    e.weights[i] = std::exp(-spec.beta * excess);
  });
  return e;
}

// ------------------------------------------------------ Hamiltonian PDEs (NLS)

namespace {

class StrangStepper {
 public:
  StrangStepper(const NonlinearFunctional& functional, double h)
      : functional_(functional), h_(h), half_phase_(functional.model()->size()) {
    const auto lambda = functional.model()->eigenvalues();
    for (std::size_t k = 0; k < lambda.size(); ++k) half_phase_[k] = std::polar(1.0, -0.5 * h * lambda[k]);
    const std::size_t m = lambda.size();
    base_.resize(m);
    mid_.resize(m);
    force_.resize(m);
    next_.resize(m);
  }

  void step(std::vector<cplx>& u) {
    for (std::size_t k = 0; k < u.size(); ++k) u[k] *= half_phase_[k];
    if (functional_.spec().kind != NonlinearityKind::none) nonlinear(u);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] *= half_phase_[k];
  }

 private:
  // force = -i grad h(w)
  void rhs(std::span<const cplx> w) {
    functional_.gradient(w, force_);
    for (auto& z : force_) z = cplx(z.imag(), -z.real());
  }

  void nonlinear(std::vector<cplx>& u) {
    const std::size_t m = u.size();
    base_ = u;
    rhs(base_);
    for (std::size_t k = 0; k < m; ++k) mid_[k] = base_[k] + 0.5 * h_ * force_[k];
    rhs(mid_);
    double scale = 1.0;
    for (std::size_t k = 0; k < m; ++k) {
      next_[k] = base_[k] + h_ * force_[k];
      scale = std::max(scale, std::abs(base_[k]));
    }
    for (int iter = 0; iter < 100; ++iter) {
      for (std::size_t k = 0; k < m; ++k) mid_[k] = 0.5 * (base_[k] + next_[k]);
      rhs(mid_);
      double change = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const cplx updated = base_[k] + h_ * force_[k];
        change = std::max(change, std::abs(updated - next_[k]));
        next_[k] = updated;
      }
      if (!std::isfinite(change)) break;
      if (change <= 1e-14 * scale) {
        u = next_;
        return;
      }
    }
    u = next_;
    if (!std::all_of(u.begin(), u.end(), [](const cplx& z) { return std::isfinite(z.real()); })) return;
    converged_ = false;
  }

 public:
  bool converged_ = true;

 private:
  const NonlinearFunctional& functional_;
  double h_;
  std::vector<cplx> half_phase_;
  std::vector<cplx> base_, mid_, force_, next_;
};

double mass_of(std::span<const cplx> u) {
  double s = 0.0;
  for (const auto& z : u) s += std::norm(z);
  return s;
}

}  // namespace

Trajectory integrate_interaction(const NonlinearFunctional& functional, const Field& u0, double t_end,
                                 double dt, const FieldRunOptions& options) {
  require_same_model(u0, Field(functional.model()));
  const std::size_t n = step_count(t_end, dt);
  const double h = n > 0 ? t_end / static_cast<double>(n) : 0.0;
  Trajectory traj;
  if (options.log_invariants) traj.invariant_names = {"mass", "hamiltonian"};
  Field u = u0;
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back(u);
    if (options.log_invariants) traj.invariants.push_back({mass_of(u.coeffs), functional.hamiltonian(u)});
  };
  record(0.0);
  StrangStepper stepper(functional, h);
  for (std::size_t step = 1; step <= n; ++step) {
    stepper.step(u.coeffs);
    const double t = h * static_cast<double>(step);
    const double m = mass_of(u.coeffs);
    if (!std::isfinite(m) || std::sqrt(m) > options.norm_guard || !stepper.converged_) {
      const double t_prev = h * static_cast<double>(step - 1);
      traj.blowup = Blowup{std::min(t_prev, t), std::max(t_prev, t), t,
                           stepper.converged_ ? "norm guard" : "implicit step did not converge"};
      return traj;
    }
    if (should_record(step, n, options.record_stride)) record(t);
  }
  return traj;
}

Field advance_interaction(const NonlinearFunctional& functional, const Field& u0, double t, double dt) {
  FieldRunOptions opts;
  opts.log_invariants = false;
  auto traj = integrate_interaction(functional, u0, t, dt, opts);
  if (traj.blowup) throw ModelError("interaction flow left the admissible region");
  return traj.final_state();
}

// ----------------------------------------------------------------------- mSQG

MsqgField::MsqgField(ModelPtr model, double delta) : model_(std::move(model)), delta_(delta) {
  if (model_->dimension() != 2) throw ModelError("mSQG needs d = 2");
  if (model_->kind() != OperatorKind::laplacian_mean_zero) throw ModelError("mSQG needs the mean-zero operator");
  if (!(delta > 0.0 && delta <= 1.0)) throw ModelError("mSQG delta must lie in (0, 1]");
  int side = 3 * model_->cutoff() + 1;
  side += side % 2;
  grid_ = std::make_unique<CollocationGrid>(*model_, side);
  abs_k_.resize(model_->size());
  for (std::size_t i = 0; i < abs_k_.size(); ++i) abs_k_[i] = std::sqrt(static_cast<double>(model_->norm2(i)));
}

void MsqgField::evaluate(std::span<const cplx> u, std::span<cplx> out) const {
  const std::size_t total = grid_->size();
  std::vector<cplx> phi1(total), phi2(total), th1(total), th2(total);
  const auto slots = grid_->mode_slots();
  const double bs = grid_->backward_scale();
  const cplx I(0.0, 1.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Mode& k = model_->mode(i);
    const cplx psi = u[i] * std::pow(abs_k_[i], -delta_) * bs;
    const cplx theta = u[i] * abs_k_[i] * bs;
    phi1[slots[i]] = -I * static_cast<double>(k[1]) * psi;
    phi2[slots[i]] = I * static_cast<double>(k[0]) * psi;
    th1[slots[i]] = I * static_cast<double>(k[0]) * theta;
    th2[slots[i]] = I * static_cast<double>(k[1]) * theta;
  }
  grid_->backward(phi1);
  grid_->backward(phi2);
  grid_->backward(th1);
  grid_->backward(th2);
  for (std::size_t j = 0; j < total; ++j) phi1[j] = phi1[j] * th1[j] + phi2[j] * th2[j];
  grid_->forward(phi1);
  const double fs = grid_->forward_scale();
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = -phi1[slots[i]] * fs / abs_k_[i];
}

Field MsqgField::operator()(const Field& u) const {
  require_same_model(u, Field(model_));
  Field out(model_);
  evaluate(u.coeffs, out.coeffs);
  return out;
}

double MsqgField::max_transport_speed(std::span<const cplx> u) const {
  const std::size_t total = grid_->size();
  std::vector<cplx> phi1(total), phi2(total);
  const auto slots = grid_->mode_slots();
  const double bs = grid_->backward_scale();
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Mode& k = model_->mode(i);
    const cplx psi = u[i] * std::pow(abs_k_[i], -delta_) * bs;
    phi1[slots[i]] = cplx(0.0, -static_cast<double>(k[1])) * psi;
    phi2[slots[i]] = cplx(0.0, static_cast<double>(k[0])) * psi;
  }
  grid_->backward(phi1);
  grid_->backward(phi2);
  double speed = 0.0;
  for (std::size_t j = 0; j < total; ++j) speed = std::max(speed, std::sqrt(std::norm(phi1[j]) + std::norm(phi2[j])));
  return speed;
}

double MsqgField::stable_dt(std::span<const cplx> u) const {
  const double speed = max_transport_speed(u);
  const double kmax = model_->cutoff() * std::numbers::sqrt2;
  if (speed == 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 / (speed * kmax);
}

double MsqgField::enstrophy(const Field& u) const {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += abs_k_[i] * abs_k_[i] * std::norm(u.coeffs[i]);
  return s;
}

double MsqgField::energy(const Field& u) const {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += std::pow(abs_k_[i], 1.0 - delta_) * std::norm(u.coeffs[i]);
  return s;
}

Trajectory integrate_msqg(const MsqgField& field, const Field& u0, double t_end, double dt,
                          const FieldRunOptions& options) {
  require_same_model(u0, Field(field.model()));
  const std::size_t n = step_count(t_end, dt);
  const double limit = field.stable_dt(u0.coeffs);
  if (dt > limit) {
    throw StepSizeError("mSQG step dt = " + std::to_string(dt) + " exceeds the stability estimate; need dt <= " +
                            std::to_string(limit),
                        limit);
  }
  const double h = n > 0 ? t_end / static_cast<double>(n) : 0.0;
  Trajectory traj;
  if (options.log_invariants) traj.invariant_names = {"enstrophy", "energy"};
  Field u = u0;
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back(u);
    if (options.log_invariants) traj.invariants.push_back({field.enstrophy(u), field.energy(u)});
  };
  record(0.0);
  const std::size_t m = u.size();
  std::vector<cplx> k1(m), k2(m), k3(m), k4(m), tmp(m);
  for (std::size_t step = 1; step <= n; ++step) {
    auto& y = u.coeffs;
    field.evaluate(y, k1);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    field.evaluate(tmp, k2);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    field.evaluate(tmp, k3);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + h * k3[i];
    field.evaluate(tmp, k4);
    for (std::size_t i = 0; i < m; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    const double t = h * static_cast<double>(step);
    const double norm = std::sqrt(mass_of(y));
    if (!std::isfinite(norm) || norm > options.norm_guard) {
      const double t_prev = h * static_cast<double>(step - 1);
      traj.blowup = Blowup{std::min(t_prev, t), std::max(t_prev, t), t, "norm guard"};
      return traj;
    }
    if (should_record(step, n, options.record_stride)) record(t);
  }
  return traj;
}

// ------------------------------------------------------------ counter-example

std::array<double, 2> counterexample_field(double q, double p) {
  return {q * q, (2.0 * q - q * q * q) * gaussian_mills(p)};
}

CounterexampleRun integrate_counterexample(double q0, double p0, double t_end,
                                           const CounterexampleOptions& options) {
  if (!(t_end > 0.0)) throw ModelError("counter-example horizon must be positive");
  // Dormand-Prince 5(4)
  static constexpr double c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  static constexpr double a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static constexpr double e[7] = {35.0 / 384 - 5179.0 / 57600,  0.0, 500.0 / 1113 - 7571.0 / 16695,
                                  125.0 / 192 - 393.0 / 640,     -2187.0 / 6784 + 92097.0 / 339200,
                                  11.0 / 84 - 187.0 / 2100,     -1.0 / 40};
  (void)c;

  CounterexampleRun run;
  auto& traj = run.trajectory;
  traj.invariant_names = {};
  std::array<double, 2> y{q0, p0};
  bool p_active = true;
  auto rhs = [&](const std::array<double, 2>& s) {
    auto f = counterexample_field(s[0], s[1]);
    if (!p_active) f[1] = 0.0;
    return f;
  };
  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back({y[0], y[1]});
    traj.invariants.push_back({});
  };
  record(0.0);

  double t = 0.0;
  double h = std::min(1e-3, t_end);
  std::array<std::array<double, 2>, 7> k{};
  k[0] = rhs(y);
  if (!std::isfinite(k[0][1])) {
    run.p_escape_time = 0.0;
    p_active = false;
    k[0] = rhs(y);
  }
  std::size_t accepted = 0;
  while (t < t_end) {
    h = std::min(h, t_end - t);
    std::array<double, 2> stage;
    bool finite = true;
    for (int s = 1; s < 7; ++s) {
      for (int i = 0; i < 2; ++i) {
        double acc = y[i];
        for (int j = 0; j < s; ++j) acc += h * a[s][j] * k[j][i];
        stage[i] = acc;
      }
      k[s] = rhs(stage);
      if (!std::isfinite(k[s][0]) || !std::isfinite(k[s][1])) {
        finite = false;
        break;
      }
    }
    double err = 0.0;
    std::array<double, 2> y_new = stage;  // row 6 equals the 5th-order solution
    if (finite) {
      for (int i = 0; i < 2; ++i) {
        if (i == 1 && !p_active) continue;
        double ei = 0.0;
        for (int j = 0; j < 7; ++j) ei += e[j] * k[j][i];
        ei *= h;
        const double sc = options.atol + options.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
        err = std::max(err, std::abs(ei) / sc);
      }
    }
    if (!finite || !(err <= 1.0)) {
      h *= finite ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.25;
      if (h < 1e-15 * std::max(1.0, t)) {
        if (p_active && y[1] < 0.0) {
          run.p_escape_time = t;
          p_active = false;
          k[0] = rhs(y);
          h = 1e-6;
          continue;
        }
        traj.blowup = Blowup{t, t, t, "step size underflow"};
        break;
      }
      continue;
    }
    const double t_prev = t;
    t += h;
    y = y_new;
    k[0] = k[6];
    ++accepted;
    h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-30), -0.2)));

    if (std::abs(y[0]) > options.q_guard) {
      traj.blowup = Blowup{t_prev, t + 2.0 / std::abs(y[0]), t, "q guard"};
      record(t);
      break;
    }
    if (p_active && (y[1] < -options.p_escape || !std::isfinite(k[0][1]))) {
      run.p_escape_time = t;
      p_active = false;
      k[0] = rhs(y);
    }
    if (options.record_stride > 0 && accepted % options.record_stride == 0) record(t);
  }
  if (!traj.blowup && traj.times.back() != t) record(t);
  run.steps = accepted;
  return run;
}

double counterexample_nonglobal_probability(double horizon) {
  const double q_star = 1.0 / horizon;
  auto escape = [&](double q0) {
    const double x = 1.0 - q0 * horizon;
    if (x <= 0.0) return 1.0;
    const double minus_i = 2.0 * std::log(x) + 0.5 * q0 * q0 * (1.0 / (x * x) - 1.0);
    return minus_i > 0.0 ? -std::expm1(-minus_i) : 0.0;
  };
  auto density = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };
  // composite Simpson on [-12, q_star]
  const int n = 400000;
  const double lo = -12.0;
  const double step = (q_star - lo) / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = lo + step * i;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * density(z) * escape(z);
  }
  return sum * step / 3.0 + (1.0 - normal_cdf(q_star));
}

// -------------------------------------------------------------- pushforward

std::vector<double> PushforwardResult::active_weights() const {
  std::vector<double> w = ensemble.weights;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (excluded[i]) w[i] = 0.0;
  }
  return w;
}

PushforwardResult pushforward(const Ensemble& e, const SampleFlow& flow, double t) {
  e.validate();
  PushforwardResult out;
  out.ensemble = e;
  out.excluded.assign(e.size(), 0);
  parallel_for(e.size(), [&](std::size_t i) {
    auto moved = flow(e.samples[i], t);
    if (moved) {
      out.ensemble.samples[i] = std::move(*moved);
    } else {
      out.excluded[i] = 1;
    }
  });
  double total = 0.0, lost = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    total += e.weights[i];
    if (out.excluded[i]) lost += e.weights[i];
  }
  out.excluded_mass = lost / total;
  return out;
}

SampleFlow linear_flow() {
  return [](const Field& u, double t) -> std::optional<Field> { return apply_semigroup(u, t, -1); };
}

SampleFlow interaction_flow(const NonlinearFunctional& functional, double dt) {
  return [&functional, dt](const Field& u, double t) -> std::optional<Field> {
    if (t == 0.0) return u;
    FieldRunOptions opts;
    opts.log_invariants = false;
    auto traj = integrate_interaction(functional, u, t, dt, opts);
    if (traj.blowup) return std::nullopt;
    return traj.final_state();
  };
}

SampleFlow msqg_flow(const MsqgField& field, double dt) {
  return [&field, dt](const Field& u, double t) -> std::optional<Field> {
    if (t == 0.0) return u;
    FieldRunOptions opts;
    opts.log_invariants = false;
    auto traj = integrate_msqg(field, u, t, dt, opts);
    if (traj.blowup) return std::nullopt;
    return traj.final_state();
  };
}

}  // namespace liouvlab
