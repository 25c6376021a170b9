#include <doctest.h>

#include <cmath>
#include <random>

#include "liouvlab/flows.hpp"
#include "liouvlab/stats.hpp"

using namespace liouvlab;

namespace {

Field random_field(const ModelPtr& m, unsigned seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, scale);
  Field u(m);
  for (auto& c : u.coeffs) c = {n(gen), n(gen)};
  return u;
}

// real field with u_{-k} = conj(u_k) and E|u_k|^2 ~ |k|^{-2}
Field real_field(const ModelPtr& m, unsigned seed, double scale) {
  Field u = random_field(m, seed, scale);
  Field sym(m);
  for (std::size_t k = 0; k < m->size(); ++k) {
    const auto& mode = m->mode(k);
    const auto j = *m->index_of({-mode[0], -mode[1]});
    sym.coeffs[k] = 0.5 * (u.coeffs[k] + std::conj(u.coeffs[j])) / static_cast<double>(m->norm2(k));
  }
  return sym;
}

double max_abs_diff(const Field& a, const Field& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a.coeffs[k] - b.coeffs[k]));
  return worst;
}

OdeHamiltonianSpec harmonic(int d) {
  OdeHamiltonianSpec spec;
  spec.d = d;
  spec.singular = false;
  return spec;
}

}  // namespace

TEST_CASE("verlet reproduces the harmonic rotation with second-order error") {
  // h = |p|^2 + |q|^2: q' = 2p, p' = -2q
  const auto spec = harmonic(2);
  const std::vector<double> x0{1.0, -0.5, 0.25, 0.75};
  const double T = 3.0;
  auto error = [&](double dt) {
    const auto traj = integrate_hamiltonian_ode(spec, x0, T, dt);
    CHECK_FALSE(traj.blowup.has_value());
    CHECK(traj.times.back() == doctest::Approx(T));
    double worst = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double q = x0[i] * std::cos(2 * T) + x0[2 + i] * std::sin(2 * T);
      const double p = -x0[i] * std::sin(2 * T) + x0[2 + i] * std::cos(2 * T);
      worst = std::max({worst, std::abs(traj.final_state()[i] - q), std::abs(traj.final_state()[2 + i] - p)});
    }
    return worst;
  };
  const double e1 = error(1e-2), e2 = error(5e-3), e3 = error(2.5e-3);
  CHECK(e1 < 1e-3);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(std::log2(e2 / e3) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("verlet is time reversible and nearly conserves energy") {
  OdeHamiltonianSpec spec;  // quadratic phi, singular term
  spec.d = 5;
  std::vector<double> x0(10);
  for (int i = 0; i < 10; ++i) x0[i] = 0.3 + 0.1 * i * (i % 2 ? -1 : 1);
  const auto forward = integrate_hamiltonian_ode(spec, x0, 2.0, 1e-3);
  const auto back = integrate_hamiltonian_ode(spec, forward.final_state(), -2.0, 1e-3);
  for (int i = 0; i < 10; ++i) CHECK(back.final_state()[i] == doctest::Approx(x0[i]).epsilon(1e-9));
  CHECK(forward.max_relative_drift(0) < 1e-4);
  spec.phi_kind = PhiKind::quartic;
  const auto quartic = integrate_hamiltonian_ode(spec, x0, 2.0, 1e-3);
  CHECK(quartic.max_relative_drift(0) < 1e-4);
}

TEST_CASE("ode spec validation") {
  OdeHamiltonianSpec spec;
  spec.d = 5;
  spec.alpha = 0.5;  // needs alpha < 1/2
  CHECK_THROWS_AS(spec.validate(), ModelError);
  spec.alpha = 0.25;
  spec.beta = 0.0;
  CHECK_THROWS_AS(spec.validate(), ModelError);
  spec.beta = 1.0;
  CHECK_NOTHROW(spec.validate());
  const std::vector<double> zero_q{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  CHECK_THROWS_AS(integrate_hamiltonian_ode(spec, zero_q, 1.0, 1e-2), ModelError);
}

TEST_CASE("ode gibbs weights follow exp(-beta h) relative to the proposal") {
  OdeHamiltonianSpec spec;
  spec.d = 5;
  spec.phi_kind = PhiKind::quartic;
  const auto e = sample_ode_gibbs(spec, 200, 8);
  for (std::size_t i = 0; i < e.points.size(); ++i) {
    const auto& x = e.points[i];
    double q2 = 0.0, p2 = 0.0;
    for (int j = 0; j < 5; ++j) {
      q2 += x[j] * x[j];
      p2 += x[5 + j] * x[5 + j];
    }
    const double proposal = q2 + p2;
    CHECK(e.weights[i] == doctest::Approx(std::exp(-(ode_energy(spec, x) - proposal))).epsilon(1e-12));
  }
}

TEST_CASE("interaction flow without nonlinearity is the free group") {
  auto m = build_model(1, 5, 0.0, OperatorKind::laplacian_plus_one);
  const NonlinearFunctional none(m, make_nonlinearity(*m, NonlinearityKind::none));
  const auto u0 = random_field(m, 1);
  const auto traj = integrate_interaction(none, u0, 1.7, 1e-2);
  CHECK(max_abs_diff(traj.final_state(), apply_semigroup(u0, 1.7, -1)) < 1e-12);
  CHECK(max_abs_diff(*linear_flow()(u0, 1.7), apply_semigroup(u0, 1.7, -1)) == 0.0);
}

TEST_CASE("strang splitting conserves mass and is second order") {
  auto m = build_model(1, 8, 0.0, OperatorKind::laplacian_plus_one);
  for (auto kind : {NonlinearityKind::nls_power, NonlinearityKind::hartree}) {
    const NonlinearFunctional h(m, make_nonlinearity(*m, kind, 2));
    const auto u0 = random_field(m, 3, 0.5);
    FieldRunOptions opts;
    opts.record_stride = 10;
    const auto traj = integrate_interaction(h, u0, 1.0, 1e-2, opts);
    CAPTURE(to_string(kind));
    CHECK(traj.max_relative_drift(0) < 1e-12);
    const double d1 = integrate_interaction(h, u0, 1.0, 2e-2).max_relative_drift(1);
    const double d2 = integrate_interaction(h, u0, 1.0, 1e-2).max_relative_drift(1);
    CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.15));
    // end-state convergence against a fine reference
    const auto ref = advance_interaction(h, u0, 1.0, 1.25e-3);
    const double e1 = max_abs_diff(advance_interaction(h, u0, 1.0, 2e-2), ref);
    const double e2 = max_abs_diff(advance_interaction(h, u0, 1.0, 1e-2), ref);
    CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.1));
  }
}

TEST_CASE("norm guard closes a run with a blowup bracket") {
  auto m = build_model(1, 4, 0.0, OperatorKind::laplacian_plus_one);
  const NonlinearFunctional none(m, make_nonlinearity(*m, NonlinearityKind::none));
  FieldRunOptions opts;
  opts.norm_guard = 1e-3;
  const auto traj = integrate_interaction(none, random_field(m, 2), 1.0, 0.1, opts);
  REQUIRE(traj.blowup.has_value());
  CHECK(traj.blowup->time_lower == 0.0);
  CHECK(traj.blowup->time_upper == doctest::Approx(0.1));
  CHECK_FALSE(interaction_flow(none, 0.1)(random_field(m, 2), 0.0) == std::nullopt);
}

TEST_CASE("msqg field vanishes on a single real mode pair") {
  auto m = build_model(2, 4, 0.0, OperatorKind::laplacian_mean_zero);
  for (double delta : {0.5, 1.0}) {
    const MsqgField field(m, delta);
    Field u(m);
    const auto k = *m->index_of({2, 1});
    const auto mk = *m->index_of({-2, -1});
    u.coeffs[k] = {0.3, 0.4};
    u.coeffs[mk] = {0.3, -0.4};
    CHECK(sobolev_norm(field(u), 0.0) < 1e-14);
    const auto traj = integrate_msqg(field, u, 1.0, 1e-2);
    CHECK(max_abs_diff(traj.final_state(), u) < 1e-14);
  }
}

TEST_CASE("msqg conserves enstrophy, is reversible and fourth order") {
  auto m = build_model(2, 6, 0.0, OperatorKind::laplacian_mean_zero);
  for (double delta : {0.5, 1.0}) {
    const MsqgField field(m, delta);
    const auto u0 = real_field(m, 5, 0.6);
    FieldRunOptions opts;
    opts.record_stride = 20;
    const auto traj = integrate_msqg(field, u0, 1.0, 5e-3, opts);
    CAPTURE(delta);
    CHECK(traj.max_relative_drift(0) < 1e-6);
    CHECK(traj.max_relative_drift(1) < 1e-6);
    // v(u) is tangent to the enstrophy sphere
    CHECK(std::abs(real_pairing(field(u0), Field(m, [&] {
                     std::vector<cplx> c(u0.coeffs);
                     for (std::size_t i = 0; i < c.size(); ++i) c[i] *= m->norm2(i);
                     return c;
                   }()))) < 1e-12);
    const auto back = integrate_msqg(field, traj.final_state(), -1.0, 5e-3);
    CHECK(max_abs_diff(back.final_state(), u0) < 1e-8);
    const auto ref = integrate_msqg(field, u0, 1.0, 1.25e-3).final_state();
    const double e1 = max_abs_diff(integrate_msqg(field, u0, 1.0, 2e-2).final_state(), ref);
    const double e2 = max_abs_diff(integrate_msqg(field, u0, 1.0, 1e-2).final_state(), ref);
    CHECK(std::log2(e1 / e2) == doctest::Approx(4.0).epsilon(0.1));
  }
}

TEST_CASE("msqg refuses steps beyond the stability estimate") {
  auto m = build_model(2, 6, 0.0, OperatorKind::laplacian_mean_zero);
  const MsqgField field(m, 1.0);
  const auto u0 = real_field(m, 6, 5.0);
  const double limit = field.stable_dt(u0.coeffs);
  try {
    integrate_msqg(field, u0, 1.0, 2.0 * limit);
    FAIL("expected StepSizeError");
  } catch (const StepSizeError& e) {
    CHECK(e.required_dt == doctest::Approx(limit));
  }
  CHECK_THROWS_AS(MsqgField(build_model(1, 4, 0.0, OperatorKind::laplacian_mean_zero), 1.0), ModelError);
  CHECK_THROWS_AS(MsqgField(m, 1.5), ModelError);
}

TEST_CASE("counter-example q component follows q0 / (1 - q0 t)") {
  const auto up = integrate_counterexample(1.0, 0.0, 2.0);
  REQUIRE(up.trajectory.blowup.has_value());
  CHECK(up.trajectory.blowup->contains(1.0));
  CHECK(up.trajectory.blowup->width() < 1e-6);
  CHECK(up.q_blowup_before(1.5));
  CHECK_FALSE(up.q_blowup_before(0.9));

  CounterexampleOptions opts;
  opts.record_stride = 1;
  const auto down = integrate_counterexample(-1.0, 0.0, 100.0, opts);
  CHECK_FALSE(down.trajectory.blowup.has_value());
  CHECK(down.trajectory.times.back() == doctest::Approx(100.0));
  for (std::size_t i = 0; i < down.trajectory.times.size(); ++i) {
    const double t = down.trajectory.times[i];
    CHECK(std::abs(down.trajectory.states[i][0] + 1.0 / (1.0 + t)) < 1e-6);
  }
  const auto half = integrate_counterexample(0.5, 1.0, 1.0);
  CHECK(half.trajectory.final_state()[0] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("counter-example field and non-global probability") {
  const auto v = counterexample_field(1.5, 0.3);
  CHECK(v[0] == doctest::Approx(2.25));
  // (2q - q^3) * sqrt(pi/2) erfcx(p / sqrt 2), direct quadrature of the Mills ratio
  double tail = 0.0;
  const double ds = 1e-4;
  for (double s = 0.3; s < 40.0; s += ds) tail += ds * std::exp(-0.5 * (s + 0.5 * ds) * (s + 0.5 * ds));
  CHECK(v[1] == doctest::Approx((3.0 - 3.375) * std::exp(0.5 * 0.09) * tail).epsilon(1e-6));
  for (double T : {0.5, 1.0, 4.0}) {
    const double p = counterexample_nonglobal_probability(T);
    CHECK(p >= 1.0 - normal_cdf(1.0 / T));
    CHECK(p <= 1.0);
  }
}

TEST_CASE("pushforward keeps weights and records excluded mass") {
  auto m = build_model(1, 3, 0.0, OperatorKind::laplacian_plus_one);
  auto e = sample_gaussian(m, 20, 4);
  for (std::size_t i = 0; i < e.size(); ++i) e.weights[i] = 1.0 + i;
  const auto same = pushforward(e, linear_flow(), 0.0);
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(same.ensemble.samples[i].coeffs == e.samples[i].coeffs);
    CHECK(same.ensemble.weights[i] == e.weights[i]);
  }
  CHECK(same.excluded_mass == 0.0);
  SampleFlow lossy = [](const Field& u, double) -> std::optional<Field> {
    if (u.coeffs[0].real() > 0.0) return std::nullopt;
    return u;
  };
  const auto lost = pushforward(e, lossy, 1.0);
  double total = 0.0, gone = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    total += e.weights[i];
    if (e.samples[i].coeffs[0].real() > 0.0) gone += e.weights[i];
    CHECK(lost.active_weights()[i] == (lost.excluded[i] ? 0.0 : e.weights[i]));
  }
  CHECK(lost.excluded_mass == doctest::Approx(gone / total));
}
