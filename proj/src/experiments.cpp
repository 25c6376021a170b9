#include "liouvlab/experiments.hpp"

#include <fftw3.h>
#include <openssl/crypto.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <memory>
#include <ostream>
#include <sstream>

#include "liouvlab/constructions.hpp"
#include "liouvlab/liouville.hpp"
#include "liouvlab/parallel.hpp"
#include "liouvlab/projection.hpp"
#include "liouvlab/rng.hpp"
#include "liouvlab/special.hpp"
#include "liouvlab/stats.hpp"

namespace liouvlab {

namespace {

namespace fs = std::filesystem;
using json = io::json;
using Config = ExperimentConfig;

constexpr const char* kVersion = "0.1.0";
constexpr int kSchemaVersion = 1;
constexpr std::uint32_t kMollifyStream = 4;

template <class F>
auto step(const char* operation, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const OperationError&) {
    throw;
  } catch (const std::exception& e) {
    throw OperationError(operation, e.what());
  }
}

Verdict compare(std::string name, double measured, const char* relation, double tolerance, bool soft,
                std::string note = {}) {
  const std::string rel = relation;
  bool ok = false;
  if (rel == "<=") ok = measured <= tolerance;
  if (rel == ">=") ok = measured >= tolerance;
  if (rel == ">") ok = measured > tolerance;
  if (rel == "==") ok = measured == tolerance;
  return {std::move(name), ok ? "pass" : (soft ? "warn" : "fail"), measured, rel, tolerance, std::move(note)};
}

Verdict require(std::string name, double measured, const char* relation, double tolerance, std::string note = {}) {
  return compare(std::move(name), measured, relation, tolerance, false, std::move(note));
}

Verdict advise(std::string name, double measured, const char* relation, double tolerance, std::string note = {}) {
  return compare(std::move(name), measured, relation, tolerance, true, std::move(note));
}

// pass at zero, warn below the threshold, fail at or above it
Verdict excluded_verdict(double mass, const Config& c) {
  Verdict v{"excluded_mass", "pass", mass, "<", c.excluded_warn, "blowup mass removed from the estimators"};
  if (mass > 0.0) v.status = mass < c.excluded_warn ? "warn" : "fail";
  return v;
}

ModelPtr model_of(const Config& c) {
  return step("build_model", [&] { return build_model(c.d, c.N, c.s, operator_kind_from_string(c.kind)); });
}

std::shared_ptr<NonlinearFunctional> functional_of(const Config& c, const ModelPtr& m) {
  return step("make_nonlinearity", [&] {
    auto spec = make_nonlinearity(*m, nonlinearity_from_string(c.nonlinearity), c.r);
    if (c.potential != "default") {
      spec.potential = potential_from_string(c.potential);
      spec.potential_decay = c.potential_decay;
    }
    validate_nonlinearity(*m, spec);
    return std::make_shared<NonlinearFunctional>(m, spec);
  });
}

struct Prepared {
  Ensemble measure;
  std::shared_ptr<NonlinearFunctional> functional;
  std::optional<GibbsDiagnostics> gibbs;
  bool invariant = false;  // measure is invariant under the configured flow
};

Prepared prepare(const Config& c, const ModelPtr& m) {
  Prepared p;
  if (c.nonlinearity != "none") p.functional = functional_of(c, m);
  if (c.measure == "enstrophy") {
    p.measure = step("sample_enstrophy_gaussian", [&] { return sample_enstrophy_gaussian(m, c.count, c.seed); });
    p.invariant = c.displacement == 0.0;
  } else {
    p.measure = step("sample_gaussian", [&] { return sample_gaussian(m, c.count, c.seed); });
    p.invariant = c.displacement == 0.0 && (c.measure == "gibbs" || c.resolved_flow() == "linear");
  }
  if (c.displacement != 0.0) {
    Field shift(m);
    for (std::size_t k = 0; k < std::min<std::size_t>(3, m->size()); ++k) shift.coeffs[k] = c.displacement;
    p.measure = displaced(p.measure, shift);
  }
  if (c.measure == "gibbs") {
    auto g = step("gibbs_reweight", [&] { return gibbs_reweight(p.measure, *p.functional); });
    p.measure = std::move(g.ensemble);
    p.gibbs = g.diagnostics;
  }
  return p;
}

void gibbs_report(const Prepared& p, const Config& c, ExperimentOutput& out) {
  if (!p.gibbs) return;
  const auto& g = *p.gibbs;
  out.summary["gibbs"] = {{"ess", g.ess},
                          {"ess_fraction", g.ess_fraction},
                          {"l2_first_half", g.l2_first_half},
                          {"l2_second_half", g.l2_second_half},
                          {"l2_relative_difference", g.l2_relative_difference},
                          {"unreliable", g.unreliable}};
  out.verdicts.push_back(advise("gibbs_ess_fraction", g.ess_fraction, ">=", c.ess_warn, "importance-weight degradation"));
}

double invariant_drift(const Trajectory& traj, const std::string& name) {
  const auto it = std::find(traj.invariant_names.begin(), traj.invariant_names.end(), name);
  if (it == traj.invariant_names.end()) throw OperationError("invariant_log", "no invariant named " + name);
  return traj.max_relative_drift(static_cast<std::size_t>(it - traj.invariant_names.begin()));
}

double max_abs_z(const std::vector<ResidualRecord>& records) {
  double worst = 0.0;
  for (const auto& r : records) worst = std::max(worst, std::abs(r.z));
  return worst;
}

double max_excluded(const std::vector<ResidualRecord>& records) {
  double worst = 0.0;
  for (const auto& r : records) worst = std::max(worst, r.excluded_mass);
  return worst;
}

json record_json(const ResidualRecord& r, const Config& c) {
  json j = io::residual_to_json(r);
  j["test_se"] = r.test_se();
  j["control"] = c.control;
  return j;
}

// Transport configuration shared by verify-liouville and project.
struct Transport {
  StateFamily family;
  VectorField v;
  std::string description;
};

Transport transport(const Config& c, const ModelPtr& m, const Prepared& p) {
  Transport tr;
  if (c.resolved_flow() == "linear") {
    tr.family = free_flow_family(p.measure);
    tr.v = free_vector_field(m);
    tr.description = "free flow of the sampled measure";
  } else if (p.invariant) {
    tr.family = rotating_family(p.measure);
    tr.v = interaction_vector_field(*p.functional);
    tr.description = "interaction picture of the invariant Gibbs measure";
  } else {
    tr.family = interaction_family(p.measure, *p.functional, c.dt);
    tr.v = interaction_vector_field(*p.functional);
    tr.description = "interaction picture of the Strang-transported measure";
  }
  if (c.control == "flip") {
    tr.v = negated(tr.v);
    tr.description += " (control: sign-flipped field)";
  } else if (c.control == "mismatch") {
    tr.family = frozen_family(p.measure);
    tr.description += " (control: frozen measure)";
  } else if (c.control == "drift") {
    tr.v = drifted(tr.v, basis_field(m, 0, c.control_drift));
    tr.description += " (control: drifted field)";
  }
  return tr;
}

void control_or_null_verdict(const Config& c, double worst_z, double excluded, ExperimentOutput& out) {
  if (c.control == "none") {
    out.verdicts.push_back(require("max_abs_z", worst_z, "<=", c.z_max * (1.0 + excluded),
                                   "tolerance widened by the excluded mass"));
  } else {
    out.verdicts.push_back(require("control_detected_max_abs_z", worst_z, ">", c.z_control,
                                   "negative control '" + c.control + "' must be rejected"));
  }
}

// ------------------------------------------------------------------ sample

void run_sample(const Config& c, ExperimentOutput& out) {
  const auto m = model_of(c);
  auto p = prepare(c, m);
  gibbs_report(p, c, out);
  const std::size_t modes = std::min<std::size_t>(m->size(), 9);
  const bool has_oracle = c.measure != "gibbs" && c.displacement == 0.0;
  double worst = 0.0;
  for (std::size_t k = 0; k < modes; ++k) {
    std::vector<double> sq(p.measure.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = std::norm(p.measure.samples[i].coeffs[k]);
    const auto est = weighted_mean(sq, p.measure.weights);
    const double lambda = m->eigenvalue(k);
    json r{{"experiment", c.experiment}, {"mode_index", k},     {"k0", m->mode(k)[0]},
           {"k1", m->mode(k)[1]},        {"lambda", lambda},    {"mean_abs2", est.mean},
           {"se", est.se}};
    if (has_oracle) {
      const double oracle = c.measure == "enstrophy" ? 1.0 / m->norm2(k) : 2.0 / lambda;
      const double z = (est.mean - oracle) / est.se;
      r["oracle"] = oracle;
      r["z"] = z;
      worst = std::max(worst, std::abs(z));
    }
    out.records.push_back(std::move(r));
  }
  out.summary["model"] = io::model_to_json(*m);
  out.summary["count"] = p.measure.size();
  out.summary["label"] = p.measure.label;
  if (has_oracle) out.verdicts.push_back(require("second_moment_max_abs_z", worst, "<=", c.z_max));
  out.ensemble = std::move(p.measure);
}

// ------------------------------------------------------------------ evolve

std::size_t stride_for(double t_end, double dt) {
  const auto steps = static_cast<std::size_t>(std::ceil(std::abs(t_end) / dt));
  return std::max<std::size_t>(1, steps / 1000);
}

void run_evolve(const Config& c, ExperimentOutput& out) {
  const std::string flow = c.resolved_flow();
  std::ostringstream csv;
  if (flow == "counterexample") {
    CounterexampleOptions opts;
    opts.record_stride = 1;
    const auto run = step("integrate_counterexample", [&] { return integrate_counterexample(c.q0, c.p0, c.t_end, opts); });
    io::write_trajectory_csv(csv, run.trajectory, {"q", "p"});
    json r{{"experiment", c.experiment}, {"q0", c.q0}, {"p0", c.p0}, {"t_end", c.t_end}, {"steps", run.steps}};
    if (run.trajectory.blowup) {
      r["blowup_lower"] = run.trajectory.blowup->time_lower;
      r["blowup_upper"] = run.trajectory.blowup->time_upper;
      r["blowup_reason"] = run.trajectory.blowup->reason;
    }
    if (run.p_escape_time) r["p_escape_time"] = *run.p_escape_time;
    out.records.push_back(std::move(r));
    out.files.emplace_back("trajectory.csv", csv.str());
    return;
  }
  if (flow == "ode") {
    OdeHamiltonianSpec spec{c.ode_d, c.phi == "quartic" ? PhiKind::quartic : PhiKind::quadratic, c.alpha, c.beta, true};
    const auto cloud = step("sample_ode_gibbs", [&] { return sample_ode_gibbs(spec, c.count, c.seed); });
    OdeRunOptions opts;
    opts.record_stride = stride_for(c.t_end, c.dt);
    std::vector<std::string> labels;
    for (int j = 0; j < c.ode_d; ++j) labels.push_back("q_" + std::to_string(j));
    for (int j = 0; j < c.ode_d; ++j) labels.push_back("p_" + std::to_string(j));
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      const auto traj = step("integrate_hamiltonian_ode",
                             [&] { return integrate_hamiltonian_ode(spec, cloud.points[i], c.t_end, c.dt, opts); });
      if (i == 0) io::write_trajectory_csv(csv, traj, labels);
      json r{{"experiment", c.experiment}, {"sample", i}, {"weight", cloud.weights[i]}, {"energy_drift", traj.max_relative_drift(0)}};
      if (traj.blowup) {
        r["blowup_lower"] = traj.blowup->time_lower;
        r["blowup_reason"] = traj.blowup->reason;
      }
      out.records.push_back(std::move(r));
    }
    out.files.emplace_back("trajectory.csv", csv.str());
    return;
  }
  const auto m = model_of(c);
  const auto p = prepare(c, m);
  gibbs_report(p, c, out);
  FieldRunOptions opts;
  opts.record_stride = stride_for(c.t_end, c.dt);
  double worst = 0.0;
  std::unique_ptr<MsqgField> msqg;
  if (flow == "msqg") msqg = std::make_unique<MsqgField>(m, c.delta);
  for (std::size_t i = 0; i < p.measure.size(); ++i) {
    const Field& u0 = p.measure.samples[i];
    Trajectory traj;
    json r{{"experiment", c.experiment}, {"sample", i}, {"weight", p.measure.weights[i]}};
    if (flow == "interaction") {
      traj = step("integrate_interaction", [&] { return integrate_interaction(*p.functional, u0, c.t_end, c.dt, opts); });
      r["mass_drift"] = invariant_drift(traj, "mass");
      r["hamiltonian_drift"] = invariant_drift(traj, "hamiltonian");
      worst = std::max(worst, r["mass_drift"].get<double>());
    } else if (flow == "msqg") {
      traj = step("integrate_msqg", [&] { return integrate_msqg(*msqg, u0, c.t_end, c.dt, opts); });
      r["enstrophy_drift"] = invariant_drift(traj, "enstrophy");
      r["energy_drift"] = invariant_drift(traj, "energy");
      worst = std::max(worst, r["enstrophy_drift"].get<double>());
    } else {
      const std::size_t rows = std::min<std::size_t>(1000, static_cast<std::size_t>(std::ceil(c.t_end / c.dt)));
      traj.invariant_names = {"mass"};
      for (std::size_t j = 0; j <= rows; ++j) {
        const double t = c.t_end * static_cast<double>(j) / static_cast<double>(rows);
        traj.times.push_back(t);
        traj.states.push_back(apply_semigroup(u0, t, -1));
        double mass = 0.0;
        for (const auto& z : traj.states.back().coeffs) mass += std::norm(z);
        traj.invariants.push_back({mass});
      }
      r["mass_drift"] = invariant_drift(traj, "mass");
      worst = std::max(worst, r["mass_drift"].get<double>());
    }
    if (traj.blowup) {
      r["blowup_lower"] = traj.blowup->time_lower;
      r["blowup_reason"] = traj.blowup->reason;
    }
    if (i == 0) io::write_trajectory_csv(csv, traj);
    out.records.push_back(std::move(r));
  }
  if (flow == "msqg") {
    out.verdicts.push_back(require("max_enstrophy_drift", worst, "<=", c.enstrophy_tol));
  } else {
    out.verdicts.push_back(require("max_mass_drift", worst, "<=", c.mass_tol));
  }
  out.files.emplace_back("trajectory.csv", csv.str());
}

// -------------------------------------------------------- verify-liouville

void run_msqg_stationary(const Config& c, const ModelPtr& m, ExperimentOutput& out) {
  const MsqgField field(m, c.delta);
  const auto p = prepare(c, m);
  const auto tests = standard_catalog(*m);
  const auto v = autonomous([&field](const Field& u) { return field(u); });
  std::vector<ResidualRecord> recs;
  for (std::size_t k = 0; k < 3; ++k) {
    auto r = step("stationary_residual", [&] { return stationary_residual(p.measure, v, tests[k]); });
    r.experiment = c.experiment;
    out.records.push_back(record_json(r, c));
    recs.push_back(r);
  }
  out.verdicts.push_back(require("max_abs_z", max_abs_z(recs), "<=", c.z_max, "stationary form, mean of <v, grad F>"));

  const std::size_t runs = std::min<std::size_t>(3, p.measure.size());
  FieldRunOptions opts;
  double worst = 0.0;
  json drifts = json::array();
  for (std::size_t i = 0; i < runs; ++i) {
    const auto traj = step("integrate_msqg", [&] { return integrate_msqg(field, p.measure.samples[i], c.t_end, c.dt, opts); });
    const double drift = invariant_drift(traj, "enstrophy");
    drifts.push_back({{"sample", i}, {"enstrophy_drift", drift}, {"energy_drift", invariant_drift(traj, "energy")}});
    worst = std::max(worst, drift);
  }
  out.summary["enstrophy_runs"] = std::move(drifts);
  out.summary["delta"] = c.delta;
  out.verdicts.push_back(require("max_enstrophy_drift", worst, "<=", c.enstrophy_tol, "relative, over [0, t_end]"));
}

void run_verify_liouville(const Config& c, ExperimentOutput& out) {
  const auto m = model_of(c);
  if (c.resolved_flow() == "msqg") {
    run_msqg_stationary(c, m, out);
    return;
  }
  const auto p = prepare(c, m);
  gibbs_report(p, c, out);
  const auto tr = transport(c, m, p);
  out.summary["configuration"] = tr.description;
  const auto tests = standard_catalog(*m);

  // user steps plus h/2 and h/4 of the first one for the halving check
  const double h = c.dt_fd.front();
  std::vector<double> fds = c.dt_fd;
  for (double extra : {h / 2.0, h / 4.0}) {
    if (std::find(fds.begin(), fds.end(), extra) == fds.end()) fds.push_back(extra);
  }
  const auto idx = [&](double x) { return static_cast<std::size_t>(std::find(fds.begin(), fds.end(), x) - fds.begin()); };
  const std::size_t i1 = idx(h), i2 = idx(h / 2.0), i4 = idx(h / 4.0);

  std::vector<ResidualRecord> all;
  double min_ratio = INFINITY;
  std::size_t ratios = 0;
  json halving = json::array();
  for (double t : c.times) {
    auto recs = step("liouville_residuals", [&] { return liouville_residuals(tr.family, tr.v, tests, t, fds); });
    for (std::size_t f = 0; f < tests.size(); ++f) {
      const auto* row = &recs[f * fds.size()];
      const double d1 = row[i1].lhs - row[i2].lhs;
      const double d2 = row[i2].lhs - row[i4].lhs;
      // below this the dt_fd dependence is indistinguishable from rounding
      const double floor = 1e-12 * (1.0 + std::abs(row[i1].lhs)) / h;
      json cell{{"t", t}, {"F_descriptor", tests[f].descriptor()}, {"delta_h", d1}, {"delta_h2", d2}};
      if (std::abs(d1) > floor && d2 != 0.0) {
        cell["ratio"] = d1 / d2;
        min_ratio = std::min(min_ratio, d1 / d2);
        ++ratios;
      }
      halving.push_back(std::move(cell));
    }
    for (auto& r : recs) {
      r.experiment = c.experiment;
      out.records.push_back(record_json(r, c));
      all.push_back(r);
    }
  }
  out.summary["halving"] = std::move(halving);
  out.summary["dt_fd"] = fds;
  const double excluded = max_excluded(all);
  control_or_null_verdict(c, max_abs_z(all), excluded, out);
  if (c.control == "none") {
    if (ratios > 0) {
      out.verdicts.push_back(require("halving_ratio_min", min_ratio, ">=", c.halving_min,
                                     "(lhs(h) - lhs(h/2)) / (lhs(h/2) - lhs(h/4))"));
    } else {
      out.verdicts.push_back({"halving_ratio_min", "pass", 0.0, ">=", c.halving_min,
                              "no dt_fd dependence above rounding"});
    }
  }
  out.verdicts.push_back(excluded_verdict(excluded, c));
}

// ------------------------------------------------------- verify-invariance

void run_verify_invariance(const Config& c, ExperimentOutput& out) {
  const auto m = model_of(c);
  const auto p = prepare(c, m);
  gibbs_report(p, c, out);
  const auto tests = standard_catalog(*m);
  const bool linear = c.resolved_flow() == "linear";
  const auto flow_at = [&](double dt) { return linear ? linear_flow() : interaction_flow(*p.functional, dt); };

  const auto rows = step("invariance_check", [&] { return invariance_check(flow_at(c.dt), p.measure, tests, c.times); });
  std::vector<double> bias(rows.size(), 0.0);
  if (!linear) {
    // O(dt^2) term measured on a subset: e(dt) - e(dt/2) = (3/4) c dt^2
    const auto sub = p.measure.head(std::min<std::size_t>(c.refine_count, p.measure.size()));
    const auto coarse = step("invariance_check", [&] { return invariance_check(flow_at(c.dt), sub, tests, c.times); });
    const auto fine = step("invariance_check", [&] { return invariance_check(flow_at(c.dt / 2.0), sub, tests, c.times); });
    for (std::size_t i = 0; i < rows.size(); ++i) bias[i] = std::abs(coarse[i].drift - fine[i].drift) * 4.0 / 3.0;
  }
  double worst_ratio = 0.0;
  double excluded = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double allowed = c.z_max * r.se * (1.0 + r.excluded_mass) + bias[i];
    if (r.drift != 0.0) worst_ratio = std::max(worst_ratio, allowed > 0.0 ? std::abs(r.drift) / allowed : INFINITY);
    excluded = std::max(excluded, r.excluded_mass);
    out.records.push_back({{"experiment", c.experiment},
                           {"t", r.t},
                           {"F_descriptor", r.descriptor},
                           {"mean_initial", r.mean_initial},
                           {"mean_evolved", r.mean_evolved},
                           {"drift", r.drift},
                           {"se", r.se},
                           {"z", r.z},
                           {"dt_bias", bias[i]},
                           {"allowed", allowed},
                           {"excluded_mass", r.excluded_mass}});
  }
  out.verdicts.push_back(require("drift_over_allowance_max", worst_ratio, "<=", 1.0,
                                 "allowance = z_max * SE + measured O(dt^2) term"));
  out.verdicts.push_back(excluded_verdict(excluded, c));

  if (!linear) {
    const std::size_t runs = std::min<std::size_t>(3, p.measure.size());
    double mass = 0.0, ham = 0.0;
    FieldRunOptions opts;
    for (std::size_t i = 0; i < runs; ++i) {
      const auto traj = step("integrate_interaction",
                             [&] { return integrate_interaction(*p.functional, p.measure.samples[i], c.times.back(), c.dt, opts); });
      mass = std::max(mass, invariant_drift(traj, "mass"));
      ham = std::max(ham, invariant_drift(traj, "hamiltonian"));
    }
    out.summary["max_mass_drift"] = mass;
    out.summary["max_hamiltonian_drift"] = ham;
    out.verdicts.push_back(require("max_mass_drift", mass, "<=", c.mass_tol, "relative, per trajectory"));
  }
}

// ----------------------------------------------------------- integrability

std::vector<double> symmetric_grid(double window) {
  std::vector<double> grid;
  for (double t = -window; t <= window + 1e-12;) {
    grid.push_back(t);
    const double a = std::abs(t);
    t += a < 4.0 ? 0.25 : (a < 32.0 ? 1.0 : 8.0);
  }
  return grid;
}

void run_integrability(const Config& c, ExperimentOutput& out) {
  const std::string flow = c.flow;
  if (flow != "counterexample") {
    const auto m = model_of(c);
    const auto p = prepare(c, m);
    gibbs_report(p, c, out);
    const auto grid = symmetric_grid(c.windows.back());
    const auto family = p.invariant ? rotating_family(p.measure) : interaction_family(p.measure, *p.functional, c.dt);
    const auto est = step("integrability_estimate", [&] {
      return integrability_estimate(family, interaction_vector_field(*p.functional), grid, bracket_squared);
    });
    double previous = NAN, last_change = NAN;
    for (double w : c.windows) {
      const double value = windowed_integral(est.times, est.inner_mean, bracket_squared, w);
      json r{{"experiment", c.experiment}, {"part", "field"}, {"window", w}, {"integral", value}};
      if (!std::isnan(previous)) {
        last_change = std::abs(value - previous) / std::abs(value);
        r["relative_change"] = last_change;
      }
      previous = value;
      out.records.push_back(std::move(r));
    }
    out.summary["omega"] = "1 + t^2";
    out.summary["inner_spread_z"] = est.inner_spread_z;
    out.summary["inner_constant"] = est.inner_constant;
    if (c.windows.size() >= 2) {
      out.verdicts.push_back(require("window_cauchy_last_change", last_change, "<=", c.cauchy_tol,
                                     "relative change between the two largest windows"));
    }
    out.verdicts.push_back(advise("inner_norm_spread_z", est.inner_spread_z, "<=", c.z_max,
                                  "mean ||v(t)|| under mu_t should not depend on t"));
  }
  if (flow == "auto" || flow == "counterexample") {
    const auto values = step("counterexample_clipped_sweep", [&] { return counterexample_clipped_sweep(c.clips); });
    double min_increment = INFINITY, min_relative = INFINITY;
    for (std::size_t j = 0; j < values.size(); ++j) {
      json r{{"experiment", c.experiment}, {"part", "counterexample"}, {"clip", c.clips[j]}, {"clipped_mean", values[j]}};
      if (j > 0) {
        const double inc = values[j] - values[j - 1];
        min_increment = std::min(min_increment, inc);
        min_relative = std::min(min_relative, inc / values[j]);
        r["increment"] = inc;
        r["relative_increment"] = inc / values[j];
      }
      out.records.push_back(std::move(r));
    }
    if (values.size() >= 2) {
      out.verdicts.push_back(require("clipped_sweep_min_increment", min_increment, ">", 0.0, "strictly increasing"));
      out.verdicts.push_back(require("clipped_sweep_min_relative_increment", min_relative, ">", c.cauchy_tol,
                                     "never Cauchy within the window tolerance"));
    }
  }
}

// ---------------------------------------------------------- counterexample

void run_counterexample(const Config& c, ExperimentOutput& out) {
  const auto stats = step("counterexample_statistics", [&] { return counterexample_statistics(c.count, c.seed, c.horizon); });
  const double q_oracle = 1.0 - normal_cdf(1.0 / c.horizon);
  const double full_oracle = counterexample_nonglobal_probability(c.horizon);
  const double zq = (stats.q_blowup_fraction - q_oracle) / stats.q_blowup_se;
  const double zf = (stats.nonglobal_fraction - full_oracle) / stats.nonglobal_se;
  out.records.push_back({{"experiment", c.experiment}, {"quantity", "q_blowup_fraction"}, {"count", stats.count},
                         {"horizon", c.horizon},       {"value", stats.q_blowup_fraction},  {"se", stats.q_blowup_se},
                         {"oracle", q_oracle},         {"z", zq}});
  out.records.push_back({{"experiment", c.experiment}, {"quantity", "nonglobal_fraction"}, {"count", stats.count},
                         {"horizon", c.horizon},       {"value", stats.nonglobal_fraction}, {"se", stats.nonglobal_se},
                         {"oracle", full_oracle},      {"z", zf}});
  out.verdicts.push_back(require("q_blowup_fraction_abs_z", std::abs(zq), "<=", c.z_max, "oracle 1 - Phi(1/T)"));
  out.verdicts.push_back(require("nonglobal_fraction_abs_z", std::abs(zf), "<=", c.z_max, "closed-form quadrature oracle"));

  const auto run = step("integrate_counterexample", [&] { return integrate_counterexample(c.q0, c.p0, c.horizon); });
  json r{{"experiment", c.experiment}, {"quantity", "single_trajectory"}, {"q0", c.q0}, {"p0", c.p0}, {"horizon", c.horizon}};
  if (c.q0 > 0.0 && 1.0 / c.q0 < c.horizon) {
    const double expected = 1.0 / c.q0;
    double outside = 1.0;
    double width = INFINITY;
    if (run.trajectory.blowup) {
      const auto& b = *run.trajectory.blowup;
      outside = std::max({0.0, b.time_lower - expected, expected - b.time_upper});
      width = b.width();
      r["blowup_lower"] = b.time_lower;
      r["blowup_upper"] = b.time_upper;
    }
    r["expected_blowup"] = expected;
    out.verdicts.push_back(require("bracket_distance_to_1_over_q0", outside, "<=", 0.0, "bracket must contain 1/q0"));
    out.verdicts.push_back(require("bracket_width", width, "<=", c.bracket_width));
  } else {
    const double q_end = run.trajectory.final_state()[0];
    const double q_exact = c.q0 / (1.0 - c.q0 * c.horizon);
    r["q_end"] = q_end;
    r["q_closed_form"] = q_exact;
    r["relative_error"] = std::abs(q_end - q_exact) / std::max(1.0, std::abs(q_exact));
    out.verdicts.push_back(require("q_blowup_flag", run.q_blowup_before(c.horizon) ? 1.0 : 0.0, "==", 0.0,
                                   "no q blowup before the horizon"));
  }
  if (run.p_escape_time) r["p_escape_time"] = *run.p_escape_time;
  out.records.push_back(std::move(r));

  std::string csv = "blowup_time\n";
  for (double t : stats.blowup_times) {
    if (t >= 0.0) csv += io::format_double(t) + "\n";
  }
  out.files.emplace_back("blowup_times.csv", csv);
  json curve = json::array();
  for (double T = 0.25; T <= c.horizon + 1e-12; T += 0.25) {
    curve.push_back({{"T", T}, {"blowup_probability", 1.0 - normal_cdf(1.0 / T)}});
  }
  out.summary["reference_curve"] = std::move(curve);
}

// ----------------------------------------------------------------- project

void run_project(const Config& c, ExperimentOutput& out) {
  const auto m = model_of(c);
  if (c.n > 2 * m->size()) throw OperationError("projected_liouville_residual", "n exceeds the number of real coordinates");
  const auto p = prepare(c, m);
  gibbs_report(p, c, out);
  // the drift control corrupts the projected estimate, not the field
  Config plain = c;
  if (c.control == "drift") plain.control = "none";
  auto tr = transport(plain, m, p);
  std::vector<double> drift;
  if (c.control == "drift") {
    drift.assign(c.n, 0.0);
    drift[0] = c.control_drift;
    tr.description += " (control: drifted projected field)";
  }
  out.summary["configuration"] = tr.description;
  std::vector<double> a(c.n, 0.5), centre(c.n, 0.0);
  for (std::size_t j = 0; j < c.n; j += 2) centre[j] = std::max(0.0, 0.8 - 0.2 * static_cast<double>(j / 2));
  const CylTestFunction F(leading_coords(c.n), ProfileKind::gauss_bump, a, centre);
  const double t = c.times.front();
  const auto pr = step("projected_liouville_residual", [&] {
    return projected_liouville_residual(tr.family, tr.v, c.n, F, t, c.dt_fd.front(), c.bandwidths, drift);
  });
  for (std::size_t j = 0; j < pr.records.size(); ++j) {
    auto r = pr.records[j];
    r.experiment = c.experiment;
    json jr = record_json(r, c);
    jr["bandwidth"] = pr.bandwidths[j];
    out.records.push_back(std::move(jr));
  }
  out.summary["n"] = c.n;
  out.summary["extrapolated_residual"] = pr.extrapolated_residual;
  out.summary["extrapolated_se"] = pr.extrapolated_se;
  out.summary["z"] = pr.z;
  out.summary["contraction_lhs"] = pr.contraction_lhs;
  out.summary["contraction_rhs"] = pr.contraction_rhs;
  out.summary["contraction_se"] = pr.contraction_se;
  control_or_null_verdict(c, std::abs(pr.z), 0.0, out);
  out.verdicts.push_back(require("contraction_excess", pr.contraction_lhs - pr.contraction_rhs, "<=",
                                 c.z_max * pr.contraction_se, "mean |||v^n||| minus mean ||v||_*, tolerance z_max SE"));

  // projected field along the first coordinate axis
  std::vector<double> queries;
  for (int j = -8; j <= 8; ++j) {
    std::vector<double> y(c.n, 0.0);
    y[0] = 0.25 * j;
    queries.insert(queries.end(), y.begin(), y.end());
  }
  const auto field = step("project_vector_field",
                          [&] { return project_vector_field(tr.family, tr.v, t, c.n, queries, c.bandwidths.front()); });
  std::ostringstream csv;
  for (std::size_t j = 0; j < c.n; ++j) csv << "y_" << j << ",";
  for (std::size_t j = 0; j < c.n; ++j) csv << "v_" << j << ",";
  for (std::size_t j = 0; j < c.n; ++j) csv << "se_" << j << ",";
  csv << "ess,supported\n";
  for (std::size_t q = 0; q < field.query_count(); ++q) {
    for (std::size_t j = 0; j < c.n; ++j) csv << io::format_double(field.query_points[q * c.n + j]) << ",";
    for (std::size_t j = 0; j < c.n; ++j) csv << io::format_double(field.values[q * c.n + j]) << ",";
    for (std::size_t j = 0; j < c.n; ++j) csv << io::format_double(field.standard_error[q * c.n + j]) << ",";
    csv << io::format_double(field.ess_per_query[q]) << "," << (field.supported[q] ? 1 : 0) << "\n";
  }
  out.files.emplace_back("projection.csv", csv.str());
}

// ----------------------------------------------------------------- mollify

PointField point_field(const std::string& kind) {
  if (kind == "constant") {
    return [](std::span<const double>, std::span<double> o) {
      o[0] = 1.0;
      o[1] = -0.5;
    };
  }
  if (kind == "sign") {
    return [](std::span<const double> x, std::span<double> o) {
      o[0] = x[0] > 0.0 ? 1.0 : (x[0] < 0.0 ? -1.0 : 0.0);
      o[1] = 0.0;
    };
  }
  return [](std::span<const double> x, std::span<double> o) {
    o[0] = x[1];
    o[1] = -x[0];
  };
}

json bound_json(const BoundCheck& b) {
  return {{"lhs", b.lhs},           {"rhs", b.rhs},         {"slack", b.slack}, {"grid_mass", b.grid_mass},
          {"tolerance", b.tolerance}, {"grid_ok", b.grid_ok}, {"holds", b.holds}};
}

void run_mollify(const Config& c, ExperimentOutput& out) {
  PointCloud cloud;
  cloud.dim = 2;
  const CounterRng rng(c.seed, kMollifyStream);
  for (std::size_t i = 0; i < c.count; ++i) {
    const auto [x, y] = rng.normal2(i, 0);
    cloud.coords.push_back(x);
    cloud.coords.push_back(y);
    cloud.weights.push_back(1.0);
  }
  const auto v = point_field(c.vfield);
  const auto plain = step("check_mollify_bound", [&] { return check_mollify_bound(cloud, v, c.eps, c.spacing); });

  std::vector<double> norms(cloud.size());
  std::vector<double> vi(2);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    v(cloud.point(i), vi);
    norms[i] = std::hypot(vi[0], vi[1]);
  }
  const auto theta = step("construct_theta", [&] { return construct_theta(norms, cloud.weights); });
  const auto convex = step("check_mollify_bound", [&] {
    return check_mollify_bound(cloud, v, c.eps, c.spacing, [&theta](double x) { return theta(x); });
  });

  json r1 = bound_json(plain);
  r1["experiment"] = c.experiment;
  r1["check"] = "norm";
  json r2 = bound_json(convex);
  r2["experiment"] = c.experiment;
  r2["check"] = "theta";
  out.records.push_back(std::move(r1));
  out.records.push_back(std::move(r2));
  out.summary["field"] = c.vfield;
  out.summary["eps"] = c.eps;
  out.summary["spacing"] = c.spacing;
  out.summary["theta_levels"] = theta.levels;
  out.verdicts.push_back(require("grid_mass_error", std::abs(plain.grid_mass - 1.0), "<=", plain.tolerance,
                                 "quadrature of the mollified density"));
  out.verdicts.push_back(require("norm_bound_slack", plain.slack, ">=", -c.slack_tol, "mean ||v|| minus quadrature of ||v^eps|| mu^eps"));
  out.verdicts.push_back(require("theta_bound_slack", convex.slack, ">=", -c.slack_tol, "same with the convex theta"));

  std::vector<double> queries;
  for (int j = -12; j <= 12; ++j) {
    queries.push_back(0.25 * j);
    queries.push_back(0.0);
  }
  const auto mol = step("mollify", [&] { return mollify(cloud, v, c.eps, queries); });
  std::string csv = "x_0,x_1,density,v_0,v_1\n";
  for (std::size_t q = 0; q < mol.density.size(); ++q) {
    csv += io::format_double(queries[2 * q]) + "," + io::format_double(queries[2 * q + 1]) + "," +
           io::format_double(mol.density[q]) + "," + io::format_double(mol.field[2 * q]) + "," +
           io::format_double(mol.field[2 * q + 1]) + "\n";
  }
  out.files.emplace_back("mollify.csv", csv);
}

// --------------------------------------------------------- global-fraction

void run_global_fraction(const Config& c, ExperimentOutput& out) {
  const std::string flow = c.resolved_flow();
  if (flow == "counterexample") {
    const auto stats = step("counterexample_statistics", [&] { return counterexample_statistics(c.count, c.seed, c.horizon); });
    const double value = 1.0 - stats.q_blowup_fraction;
    const double oracle = normal_cdf(1.0 / c.horizon);
    const double z = (value - oracle) / stats.q_blowup_se;
    out.records.push_back({{"experiment", c.experiment}, {"flow", flow}, {"horizon", c.horizon}, {"fraction", value},
                           {"se", stats.q_blowup_se}, {"oracle", oracle}, {"z", z},
                           {"full_survival", 1.0 - stats.nonglobal_fraction}});
    out.verdicts.push_back(require("fraction_abs_z", std::abs(z), "<=", c.z_max, "oracle Phi(1/T), q-component survival"));
    return;
  }
  if (flow == "ode") {
    OdeHamiltonianSpec spec{c.ode_d, c.phi == "quartic" ? PhiKind::quartic : PhiKind::quadratic, c.alpha, c.beta, true};
    const auto cloud = step("sample_ode_gibbs", [&] { return sample_ode_gibbs(spec, c.count, c.seed); });
    const auto r = step("ode_global_fraction", [&] { return ode_global_fraction(spec, cloud, c.horizon, c.dt); });
    out.records.push_back({{"experiment", c.experiment}, {"flow", flow}, {"horizon", c.horizon}, {"fraction", r.fraction},
                           {"singular_mass", r.singular_mass}, {"overflow_mass", r.overflow_mass},
                           {"max_energy_drift", r.max_energy_drift}});
    out.verdicts.push_back(require("unexplained_loss", 1.0 - r.fraction - r.singular_mass, "<=", 1e-12,
                                   "every lost sample must be a reported singular approach"));
    out.verdicts.push_back(excluded_verdict(r.singular_mass, c));
    return;
  }
  const auto m = model_of(c);
  const auto p = prepare(c, m);
  gibbs_report(p, c, out);
  std::unique_ptr<MsqgField> msqg;
  SampleFlow use;
  if (flow == "linear") {
    use = linear_flow();
  } else if (flow == "msqg") {
    msqg = std::make_unique<MsqgField>(m, c.delta);
    use = msqg_flow(*msqg, c.dt);
  } else {
    use = interaction_flow(*p.functional, c.dt);
  }
  const auto r = step("global_fraction", [&] { return global_fraction(p.measure, use, c.horizon); });
  out.records.push_back({{"experiment", c.experiment}, {"flow", flow}, {"horizon", c.horizon}, {"fraction", r.fraction},
                         {"se", r.se}, {"excluded_mass", r.excluded_mass}});
  out.verdicts.push_back(require("lost_fraction", 1.0 - r.fraction, "<=", 0.0, "the truncated flow is global"));
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

io::json verdict_to_json(const Verdict& v) {
  return {{"name", v.name},           {"status", v.status},       {"measured", v.measured},
          {"relation", v.relation},   {"tolerance", v.tolerance}, {"note", v.note}};
}

ExperimentOutput execute(const ExperimentConfig& config) {
  ExperimentOutput out;
  const auto& e = config.experiment;
  if (e == "sample") run_sample(config, out);
  else if (e == "evolve") run_evolve(config, out);
  else if (e == "verify-liouville") run_verify_liouville(config, out);
  else if (e == "verify-invariance") run_verify_invariance(config, out);
  else if (e == "integrability") run_integrability(config, out);
  else if (e == "counterexample") run_counterexample(config, out);
  else if (e == "project") run_project(config, out);
  else if (e == "mollify") run_mollify(config, out);
  else if (e == "global-fraction") run_global_fraction(config, out);
  else throw OperationError("run", "unknown experiment '" + e + "'");
  return out;
}

int verdict_exit_code(const std::vector<Verdict>& verdicts) {
  return std::any_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.status == "fail"; }) ? 1 : 0;
}

std::string results_json(const ExperimentConfig& config, const ExperimentOutput& out) {
  json verdicts = json::array();
  for (const auto& v : out.verdicts) verdicts.push_back(verdict_to_json(v));
  json doc{{"schema_version", kSchemaVersion},
           {"experiment", config.experiment},
           {"seed", config.seed},
           {"count", config.count},
           {"records", out.records},
           {"summary", out.summary},
           {"verdicts", std::move(verdicts)}};
  return doc.dump(2) + "\n";
}

int run(const ExperimentConfig& config, std::ostream& log) {
  if (config.threads > 0) set_max_threads(static_cast<unsigned>(config.threads));
  ExperimentOutput out;
  try {
    out = execute(config);
  } catch (const OperationError& e) {
    log << "runtime failure in " << e.operation << ": " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    log << "runtime failure in " << config.experiment << ": " << e.what() << "\n";
    return 3;
  }

  try {
    const fs::path dir = config.out;
    fs::create_directories(dir);
    std::vector<std::pair<std::string, std::string>> files = {{"results.json", results_json(config, out)},
                                                              {"results.csv", io::records_to_csv(out.records)}};
    std::vector<json> vrows;
    for (const auto& v : out.verdicts) vrows.push_back(verdict_to_json(v));
    files.emplace_back("verdicts.csv", io::records_to_csv(vrows));
    for (const auto& f : out.files) files.push_back(f);

    json hashes = json::object();
    for (const auto& [name, text] : files) {
      io::write_text(dir / name, text);
      hashes[name] = io::git_blob_sha1(text);
    }
    if (out.ensemble) {
      io::write_ensemble(dir / "ensemble", *out.ensemble);
      for (const char* name : {"manifest.json", "samples.bin", "weights.csv"}) {
        hashes[std::string("ensemble/") + name] = io::git_blob_sha1(io::read_text(dir / "ensemble" / name));
      }
    }
    const std::string toml = config.to_toml();
    json versions = json::object();
    versions["liouvlab"] = kVersion;
    versions["schema"] = kSchemaVersion;
    versions["compiler"] = __VERSION__;
    versions["fftw"] = std::string(fftw_version);
    versions["openssl"] = std::string(OpenSSL_version(OPENSSL_VERSION));
    versions["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH);
    json manifest = json::object();
    manifest["tool"] = "liouvlab";
    manifest["config"] = json::parse(config.to_json());
    manifest["config_toml"] = toml;
    manifest["config_hash"] = io::git_blob_sha1(toml);
    manifest["outputs"] = std::move(hashes);
    manifest["versions"] = std::move(versions);
    manifest["threads"] = max_threads();
    manifest["timestamp"] = utc_timestamp();
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    log << "runtime failure in write_artifacts: " << e.what() << "\n";
    return 3;
  }

  for (const auto& v : out.verdicts) {
    log << "[" << v.status << "] " << v.name << ": " << io::format_double(v.measured) << " " << v.relation << " "
        << io::format_double(v.tolerance);
    if (!v.note.empty()) log << "  (" << v.note << ")";
    log << "\n";
  }
  return verdict_exit_code(out.verdicts);
}

}  // namespace liouvlab
