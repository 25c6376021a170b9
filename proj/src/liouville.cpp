#include "liouvlab/liouville.hpp"

#include <cmath>
#include <numbers>

#include "liouvlab/parallel.hpp"
#include "liouvlab/rng.hpp"
#include "liouvlab/special.hpp"
#include "liouvlab/stats.hpp"

namespace liouvlab {

StateFamily rotating_family(const Ensemble& e) {
  e.validate();
  return {e.weights, [&e](std::size_t i, double t) { return apply_semigroup(e.samples[i], t, +1); }, {}};
}

StateFamily free_flow_family(const Ensemble& e) {
  e.validate();
  return {e.weights, [&e](std::size_t i, double t) { return apply_semigroup(e.samples[i], t, -1); }, {}};
}

StateFamily frozen_family(const Ensemble& e) {
  e.validate();
  return {e.weights, [&e](std::size_t i, double) { return e.samples[i]; }, {}};
}

StateFamily transported_family(const Ensemble& e, std::function<Field(const Field&, double)> evolve) {
  e.validate();
  return {e.weights, [&e, evolve = std::move(evolve)](std::size_t i, double t) { return evolve(e.samples[i], t); }, {}};
}

StateFamily interaction_family(const Ensemble& e, const NonlinearFunctional& functional, double dt) {
  auto family = transported_family(e, [&functional, dt](const Field& u, double t) {
    if (t == 0.0) return u;
    return apply_semigroup(advance_interaction(functional, u, t, dt), t, +1);
  });
  family.advance = [&functional, dt](const Field& w, double t, double h) {
    const Field lab = apply_semigroup(w, t, -1);
    return apply_semigroup(advance_interaction(functional, lab, h, dt), t + h, +1);
  };
  return family;
}

VectorField interaction_vector_field(const NonlinearFunctional& functional) {
  return [&functional](double t, const Field& u) {
    Field g = functional.gradient(apply_semigroup(u, t, -1));
    apply_semigroup_inplace(g.coeffs, *g.model, t, +1);
    for (auto& z : g.coeffs) z = cplx(z.imag(), -z.real());
    return g;
  };
}

VectorField free_vector_field(const ModelPtr& model) {
  return [model](double, const Field& u) {
    Field out(model);
    for (std::size_t k = 0; k < u.size(); ++k) {
      const cplx z = u.coeffs[k] * model->eigenvalue(k);
      out.coeffs[k] = cplx(z.imag(), -z.real());
    }
    return out;
  };
}

VectorField autonomous(std::function<Field(const Field&)> field) {
  return [field = std::move(field)](double, const Field& u) { return field(u); };
}

VectorField negated(VectorField v) {
  return [v = std::move(v)](double t, const Field& u) { return cplx(-1.0) * v(t, u); };
}

VectorField drifted(VectorField v, Field drift) {
  return [v = std::move(v), drift = std::move(drift)](double t, const Field& u) { return v(t, u) + drift; };
}

namespace {

ResidualRecord summarize(const std::vector<double>& lhs, const std::vector<double>& rhs,
                         const std::vector<double>& weights) {
  ResidualRecord r;
  const auto ml = weighted_mean(lhs, weights);
  const auto mr = weighted_mean(rhs, weights);
  std::vector<double> diff(lhs.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = lhs[i] - rhs[i];
  const auto md = weighted_mean(diff, weights);
  r.lhs = ml.mean;
  r.rhs = mr.mean;
  r.residual = md.mean;
  r.se_lhs = ml.se;
  r.se_rhs = mr.se;
  r.se_paired = md.se;
  const double se = r.test_se();
  r.z = se > 0.0 ? md.mean / se : (md.mean == 0.0 ? 0.0 : std::copysign(INFINITY, md.mean));
  return r;
}

}  // namespace

std::vector<ResidualRecord> liouville_residuals(const StateFamily& family, const VectorField& v,
                                                const std::vector<CylTestFunction>& tests, double t,
                                                const std::vector<double>& dt_fds) {
  const std::size_t n = family.size();
  const std::size_t nf = tests.size();
  const std::size_t nd = dt_fds.size();
  for (double h : dt_fds) {
    if (!(h > 0.0)) throw ModelError("dt_fd must be positive");
  }
  std::vector<std::vector<double>> rhs(nf, std::vector<double>(n));
  std::vector<std::vector<double>> lhs(nf * nd, std::vector<double>(n));
  parallel_for(n, [&](std::size_t i) {
    const Field u = family.state(i, t);
    const Field vu = v(t, u);
    for (std::size_t f = 0; f < nf; ++f) rhs[f][i] = tests[f].directional(u, vu);
    for (std::size_t d = 0; d < nd; ++d) {
      const double h = dt_fds[d];
      const Field up = family.advance ? family.advance(u, t, h) : family.state(i, t + h);
      const Field um = family.advance ? family.advance(u, t, -h) : family.state(i, t - h);
      for (std::size_t f = 0; f < nf; ++f) {
        lhs[f * nd + d][i] = (tests[f].eval(up) - tests[f].eval(um)) / (2.0 * h);
      }
    }
  });
  std::vector<ResidualRecord> out;
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t d = 0; d < nd; ++d) {
      auto r = summarize(lhs[f * nd + d], rhs[f], family.weights);
      r.estimator = "central_difference";
      r.descriptor = tests[f].descriptor();
      r.t = t;
      r.dt_fd = dt_fds[d];
      out.push_back(std::move(r));
    }
  }
  return out;
}

ResidualRecord liouville_residual(const StateFamily& family, const VectorField& v, const CylTestFunction& F,
                                  double t, double dt_fd) {
  return liouville_residuals(family, v, {F}, t, {dt_fd}).front();
}

ResidualRecord stationary_residual(const Ensemble& e, const VectorField& v, const CylTestFunction& F) {
  e.validate();
  std::vector<double> rhs(e.size()), zero(e.size(), 0.0);
  parallel_for(e.size(), [&](std::size_t i) { rhs[i] = F.directional(e.samples[i], v(0.0, e.samples[i])); });
  auto r = summarize(zero, rhs, e.weights);
  r.estimator = "stationary";
  r.descriptor = F.descriptor();
  return r;
}

std::vector<InvarianceRow> invariance_check(const SampleFlow& flow, const Ensemble& e0,
                                            const std::vector<CylTestFunction>& tests,
                                            const std::vector<double>& t_grid, const FrameMap& frame) {
  e0.validate();
  for (std::size_t j = 1; j < t_grid.size(); ++j) {
    if (!(t_grid[j] > t_grid[j - 1])) throw ModelError("invariance_check: t_grid must increase");
  }
  if (!t_grid.empty() && t_grid.front() < 0.0) throw ModelError("invariance_check: t_grid must be >= 0");
  const std::size_t n = e0.size(), nt = t_grid.size(), nf = tests.size();
  // values[(t * nf + f)][i] for initial and evolved
  std::vector<std::vector<double>> initial(nt * nf, std::vector<double>(n));
  std::vector<std::vector<double>> evolved(nt * nf, std::vector<double>(n));
  std::vector<std::vector<char>> lost(nt, std::vector<char>(n, 0));
  parallel_for(n, [&](std::size_t i) {
    std::optional<Field> state = e0.samples[i];
    double t_prev = 0.0;
    for (std::size_t j = 0; j < nt; ++j) {
      const double t = t_grid[j];
      if (state && t > t_prev) state = flow(*state, t - t_prev);
      t_prev = t;
      const Field base = frame ? frame(e0.samples[i], t) : e0.samples[i];
      for (std::size_t f = 0; f < nf; ++f) initial[j * nf + f][i] = tests[f].eval(base);
      if (!state) {
        lost[j][i] = 1;
        continue;
      }
      const Field moved = frame ? frame(*state, t) : *state;
      for (std::size_t f = 0; f < nf; ++f) evolved[j * nf + f][i] = tests[f].eval(moved);
    }
  });
  std::vector<InvarianceRow> rows;
  for (std::size_t j = 0; j < nt; ++j) {
    std::vector<double> w = e0.weights;
    double total = 0.0, excluded = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += w[i];
      if (lost[j][i]) {
        excluded += w[i];
        w[i] = 0.0;
      }
    }
    for (std::size_t f = 0; f < nf; ++f) {
      const auto& a = initial[j * nf + f];
      const auto& b = evolved[j * nf + f];
      std::vector<double> diff(n);
      for (std::size_t i = 0; i < n; ++i) diff[i] = b[i] - a[i];
      InvarianceRow row;
      row.descriptor = tests[f].descriptor();
      row.t = t_grid[j];
      row.mean_initial = weighted_mean(a, w).mean;
      row.mean_evolved = weighted_mean(b, w).mean;
      const auto md = weighted_mean(diff, w);
      row.drift = md.mean;
      row.se = md.se;
      row.z = md.se > 0.0 ? md.mean / md.se : 0.0;
      row.excluded_mass = excluded / total;
      rows.push_back(row);
    }
  }
  return rows;
}

double bracket_squared(double t) { return 1.0 + t * t; }

double windowed_integral(const std::vector<double>& times, const std::vector<double>& values,
                         const std::function<double(double)>& omega, double window) {
  double sum = 0.0;
  for (std::size_t j = 1; j < times.size(); ++j) {
    const double a = times[j - 1], b = times[j];
    if (std::abs(a) > window + 1e-12 || std::abs(b) > window + 1e-12) continue;
    sum += 0.5 * (b - a) * (values[j - 1] / omega(std::abs(a)) + values[j] / omega(std::abs(b)));
  }
  return sum;
}

IntegrabilityResult integrability_estimate(const StateFamily& family, const VectorField& v,
                                           const std::vector<double>& t_grid,
                                           const std::function<double(double)>& omega) {
  if (t_grid.size() < 2) throw ModelError("integrability_estimate needs at least two times");
  IntegrabilityResult res;
  res.times = t_grid;
  const std::size_t n = family.size();
  std::vector<double> norms(n);
  for (double t : t_grid) {
    if (!(omega(std::abs(t)) > 0.0)) throw ModelError("omega must be positive");
    parallel_for(n, [&](std::size_t i) {
      const Field u = family.state(i, t);
      const Field vu = v(t, u);
      norms[i] = sobolev_norm(vu, -vu.model->sobolev_s());
    });
    const auto m = weighted_mean(norms, family.weights);
    res.inner_mean.push_back(m.mean);
    res.inner_se.push_back(m.se);
  }
  const double window = std::max(std::abs(t_grid.front()), std::abs(t_grid.back()));
  res.value = windowed_integral(t_grid, res.inner_mean, omega, window);
  for (std::size_t j = 1; j < t_grid.size(); ++j) {
    const double se = std::hypot(res.inner_se[j], res.inner_se[0]);
    const double gap = std::abs(res.inner_mean[j] - res.inner_mean[0]);
    const double z = se > 0.0 ? gap / se : (gap > 0.0 ? INFINITY : 0.0);
    res.inner_spread_z = std::max(res.inner_spread_z, z);
  }
  res.inner_constant = res.inner_spread_z <= 3.0;
  return res;
}

std::vector<double> clipped_sweep(std::span<const double> norms, std::span<const double> weights,
                                  std::span<const double> clips) {
  std::vector<double> out;
  std::vector<double> clipped(norms.size());
  for (double c : clips) {
    for (std::size_t i = 0; i < norms.size(); ++i) clipped[i] = std::min(norms[i], c);
    out.push_back(weighted_mean(clipped, weights).mean);
  }
  return out;
}

std::vector<double> counterexample_clipped_sweep(std::span<const double> clips, double spacing, double extent) {
  const auto points = static_cast<std::size_t>(std::llround(2.0 * extent / spacing)) + 1;
  std::vector<double> density(points);
  std::vector<double> mills(points);
  for (std::size_t j = 0; j < points; ++j) {
    const double z = -extent + spacing * static_cast<double>(j);
    density[j] = std::exp(-0.5 * z * z);
    mills[j] = gaussian_mills(z);
  }
  const std::size_t nc = clips.size();
  // row sums per q node, then pairwise across rows
  std::vector<std::vector<double>> rows(nc, std::vector<double>(points));
  std::vector<double> mass_rows(points);
  parallel_for(points, [&](std::size_t a) {
    const double q = -extent + spacing * static_cast<double>(a);
    std::vector<double> acc(nc, 0.0);
    double mass = 0.0;
    for (std::size_t b = 0; b < points; ++b) {
      const double w = density[a] * density[b];
      const double norm = std::hypot(q * q, (2.0 * q - q * q * q) * mills[b]);
      for (std::size_t c = 0; c < nc; ++c) acc[c] += w * std::min(norm, clips[c]);
      mass += w;
    }
    for (std::size_t c = 0; c < nc; ++c) rows[c][a] = acc[c];
    mass_rows[a] = mass;
  });
  const double mass = pairwise_sum(mass_rows);
  std::vector<double> out(nc);
  for (std::size_t c = 0; c < nc; ++c) out[c] = pairwise_sum(rows[c]) / mass;
  return out;
}

FractionEstimate global_fraction(const Ensemble& e, const SampleFlow& flow, double horizon) {
  const auto pushed = pushforward(e, flow, horizon);
  std::vector<double> survived(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) survived[i] = pushed.excluded[i] ? 0.0 : 1.0;
  const auto m = weighted_mean(survived, e.weights);
  return {m.mean, m.se, pushed.excluded_mass};
}

CounterexampleStats counterexample_statistics(std::size_t count, std::uint64_t seed, double horizon,
                                              const CounterexampleOptions& options) {
  const CounterRng rng(seed, 3);
  std::vector<double> qflag(count), fullflag(count), times(count, -1.0);
  parallel_for(count, [&](std::size_t i) {
    const auto [q0, p0] = rng.normal2(i, 0);
    const auto run = integrate_counterexample(q0, p0, horizon, options);
    qflag[i] = run.q_blowup_before(horizon) ? 1.0 : 0.0;
    fullflag[i] = run.non_global_before(horizon) ? 1.0 : 0.0;
    if (run.trajectory.blowup) times[i] = run.trajectory.blowup->time_lower;
  });
  CounterexampleStats s;
  s.count = count;
  const double n = static_cast<double>(count);
  s.q_blowup_fraction = pairwise_sum(qflag) / n;
  s.nonglobal_fraction = pairwise_sum(fullflag) / n;
  s.q_blowup_se = binomial_se(s.q_blowup_fraction, n);
  s.nonglobal_se = binomial_se(s.nonglobal_fraction, n);
  for (double t : times) {
    if (t >= 0.0) s.blowup_times.push_back(t);
  }
  return s;
}

OdeFractionResult ode_global_fraction(const OdeHamiltonianSpec& spec, const PointEnsemble& e, double horizon,
                                      double dt) {
  const std::size_t n = e.points.size();
  std::vector<double> alive(n), singular(n), overflow(n), drift(n);
  OdeRunOptions opts;
  opts.record_stride = 0;
  parallel_for(n, [&](std::size_t i) {
    const auto traj = integrate_hamiltonian_ode(spec, e.points[i], horizon, dt, opts);
    if (traj.blowup) {
      (traj.blowup->reason == "singularity approach" ? singular : overflow)[i] = 1.0;
    } else {
      alive[i] = 1.0;
      drift[i] = traj.max_relative_drift(0);
    }
  });
  OdeFractionResult r;
  const double total = pairwise_sum(e.weights);
  auto mass = [&](const std::vector<double>& flag) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = flag[i] * e.weights[i];
    return pairwise_sum(w) / total;
  };
  r.fraction = mass(alive);
  r.singular_mass = mass(singular);
  r.overflow_mass = mass(overflow);
  for (double x : drift) r.max_energy_drift = std::max(r.max_energy_drift, x);
  return r;
}

}  // namespace liouvlab
