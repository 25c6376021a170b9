// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "liouvlab/config.hpp"
#include "liouvlab/constructions.hpp"
#include "liouvlab/experiments.hpp"
#include "liouvlab/flows.hpp"
#include "liouvlab/liouville.hpp"
#include "liouvlab/parallel.hpp"

using namespace liouvlab;

namespace {

class Criterion {
 public:
  explicit Criterion(std::string name) : name_(std::move(name)) {}

  void check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& text) { notes_.push_back(text); }

  bool report() const {
    std::ostringstream line;
    line << (failures_.empty() ? "PASS " : "FAIL ") << name_;
    const char* sep = " | ";
    for (const auto& n : notes_) {
      line << sep << n;
      sep = "; ";
    }
    for (const auto& f : failures_) line << " [failed: " << f << "]";
    std::cout << line.str() << std::endl;
    return failures_.empty();
  }

 private:
  std::string name_;
  std::vector<std::string> notes_;
  std::vector<std::string> failures_;
};

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const Verdict* find_verdict(const ExperimentOutput& out, const std::string& name) {
  for (const auto& v : out.verdicts) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

// records the verdict's value and requires it to exist and pass
void require_verdict(Criterion& c, const ExperimentOutput& out, const std::string& name, const std::string& label) {
  const auto* v = find_verdict(out, name);
  if (!v) {
    c.check(false, "verdict " + name + " missing");
    return;
  }
  const std::string tag = label.empty() ? name : label + " " + name;
  c.note(tag + "=" + fmt(v->measured) + " " + v->relation + " " + fmt(v->tolerance));
  c.check(v->status != "fail", tag);
}

double max_record_abs_z(const ExperimentOutput& out) {
  double worst = 0.0;
  for (const auto& r : out.records) {
    if (r.contains("z")) worst = std::max(worst, std::abs(r["z"].get<double>()));
  }
  return worst;
}

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

ExperimentConfig liouville_config() {
  auto c = default_config("verify-liouville");
  c.d = 1;
  c.N = 16;
  c.s = 0.0;
  c.count = 100000;
  c.times = {0.0, 0.5, 1.0};
  return c;
}

ExperimentConfig gibbs_hartree(const std::string& experiment) {
  auto c = default_config(experiment);
  c.nonlinearity = "hartree";
  c.measure = "gibbs";
  c.potential = "gaussian";
  return c;
}

// ------------------------------------------------------------------ criteria

bool null_stationarity() {
  Criterion c("null stationarity (h_NL = none, d=1, N=16, count=1e5, 5 F, t in {0, 0.5, 1})");
  auto cfg = liouville_config();
  set_max_threads(1);
  const auto start = std::chrono::steady_clock::now();
  const auto out = execute(cfg);
  const double elapsed = seconds_since(start);
  set_max_threads(0);
  const double z = max_record_abs_z(out);
  c.note("max|z|=" + fmt(z));
  c.note("records=" + std::to_string(out.records.size()));
  c.note("single-thread runtime=" + fmt(elapsed, 3) + " s");
  c.check(out.records.size() == 5 * 3 * 3, "expected 5 F x 3 t x 3 dt_fd records");
  c.check(z <= 3.0, "|z| <= 3");
  c.check(elapsed <= 60.0, "runtime <= 60 s");
  return c.report();
}

bool gibbs_identity() {
  Criterion c("Gibbs-Hartree Liouville identity (d=1, V^=exp(-k^2), N=16, count=1e5, dt_fd {1e-2, 5e-3})");
  auto cfg = gibbs_hartree("verify-liouville");
  cfg.N = 16;
  cfg.count = 100000;
  cfg.dt_fd = {1e-2, 5e-3};
  const auto start = std::chrono::steady_clock::now();
  const auto out = execute(cfg);
  const double elapsed = seconds_since(start);
  double z = 0.0;
  for (const auto& r : out.records) {
    const double h = r["dt_fd"].get<double>();
    if (h == 1e-2 || h == 5e-3) z = std::max(z, std::abs(r["z"].get<double>()));
  }
  c.note("max|z| over dt_fd {1e-2, 5e-3}=" + fmt(z));
  c.check(z <= 3.0, "|z| <= 3");
  require_verdict(c, out, "halving_ratio_min", "");
  if (const auto* ess = find_verdict(out, "gibbs_ess_fraction")) c.note("ESS fraction=" + fmt(ess->measured, 3));
  c.note("runtime=" + fmt(elapsed, 3) + " s");
  c.check(elapsed <= 600.0, "runtime <= 10 min");
  return c.report();
}

bool gibbs_invariance() {
  Criterion c("truncated Gibbs-NLS invariance (r=2, d=1, N=16, Strang, t in [0,1], dt=1e-3)");
  auto cfg = default_config("verify-invariance");
  cfg.N = 16;
  cfg.dt = 1e-3;
  const auto out = execute(cfg);
  double worst = 0.0;
  std::size_t rows = 0;
  for (const auto& r : out.records) {
    const double drift = std::abs(r["drift"].get<double>());
    const double allowed = 3.0 * r["se"].get<double>() + r["dt_bias"].get<double>();
    ++rows;
    if (drift > 0.0) worst = std::max(worst, allowed > 0.0 ? drift / allowed : INFINITY);
  }
  c.note("rows=" + std::to_string(rows));
  c.note("max |drift| / (3 SE + O(dt^2))=" + fmt(worst));
  c.check(rows == 5 * cfg.times.size(), "5 F x times rows");
  c.check(worst <= 1.0, "drift within 3 SE + measured O(dt^2) term");
  require_verdict(c, out, "max_mass_drift", "");
  return c.report();
}

bool counterexample() {
  Criterion c("counter-example statistics (T=10, count=1e5) and q0=1 bracket");
  auto cfg = default_config("counterexample");
  cfg.count = 100000;
  cfg.horizon = 10.0;
  const auto out = execute(cfg);
  const double oracle = 1.0 - phi_cdf(0.1);
  double fraction = NAN;
  for (const auto& r : out.records) {
    if (r.value("quantity", "") == "q_blowup_fraction") fraction = r["value"].get<double>();
  }
  const double se = std::sqrt(oracle * (1.0 - oracle) / 1e5);
  c.note("blowup fraction=" + fmt(fraction, 6) + " oracle 1-Phi(0.1)=" + fmt(oracle, 6) + " (" +
         fmt((fraction - oracle) / se, 3) + " SE)");
  c.check(std::abs(fraction - oracle) <= 3.0 * se, "within 3 binomial SE");
  const auto run = integrate_counterexample(1.0, 0.0, 10.0);
  const bool has = run.trajectory.blowup.has_value();
  c.check(has, "q0=1 blows up");
  if (has) {
    const auto& b = *run.trajectory.blowup;
    c.note("bracket=[" + fmt(b.time_lower, 12) + ", " + fmt(b.time_upper, 12) + "]");
    c.check(b.contains(1.0), "bracket contains t=1");
    c.check(b.width() <= 1e-3, "bracket width <= 1e-3");
  }
  return c.report();
}

bool integrability() {
  Criterion c("integrability dichotomy (Gibbs-Hartree with omega=<t>^2 vs counter-example clipped sweep)");
  auto cfg = gibbs_hartree("integrability");
  cfg.N = 16;
  const auto out = execute(cfg);
  std::vector<double> windows, clipped;
  for (const auto& r : out.records) {
    if (r["part"] == "field") windows.push_back(r["integral"].get<double>());
    if (r["part"] == "counterexample") clipped.push_back(r["clipped_mean"].get<double>());
  }
  c.check(windows.size() >= 2 && clipped.size() == 5, "record layout");
  if (windows.size() >= 2) {
    const double change = std::abs(windows.back() - windows[windows.size() - 2]) / std::abs(windows.back());
    c.note("window values " + fmt(windows.front()) + " .. " + fmt(windows.back()) + ", last change " + fmt(change));
    c.check(change <= 0.01, "partial-window values Cauchy within 1%");
  }
  double min_rel = INFINITY;
  for (std::size_t j = 1; j < clipped.size(); ++j) {
    c.check(clipped[j] > clipped[j - 1], "clipped mean increases at clip " + std::to_string(j));
    min_rel = std::min(min_rel, (clipped[j] - clipped[j - 1]) / clipped[j]);
  }
  if (!clipped.empty()) {
    c.note("clipped 1e2..1e6: " + fmt(clipped.front()) + " .. " + fmt(clipped.back()) + ", min relative increment " +
           fmt(min_rel));
  }
  c.check(min_rel > 0.01, "clipped sweep not Cauchy (relative increments stay > 1%)");
  return c.report();
}

bool omega_theta() {
  Criterion c("omega/theta constructors");
  std::vector<double> t, f;
  for (int j = 0; j <= 4000; ++j) {
    t.push_back(0.005 * j);
    f.push_back(1.0);
  }
  const auto omega = construct_omega(t, f, 2.0);
  bool exact = !omega.l1_branch && omega.curve.knots.size() == 11;
  double knot_error = 0.0;
  for (std::size_t n = 0; n < omega.curve.knots.size(); ++n) {
    knot_error = std::max(knot_error, std::abs(omega.curve.knots[n] - 2.0 * n));
    exact = exact && omega(2.0 * n) == (n + 1.0) * (n + 1.0);
  }
  c.note("knots 0..20 max error=" + fmt(knot_error));
  c.check(exact && knot_error <= 1e-12, "a_n = 2n and omega(2n) = (n+1)^2");

  std::mt19937_64 gen(2024);
  std::lognormal_distribution<double> heavy(0.0, 1.5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst_integral = 0.0;
  bool convex = true, diverging = true;
  for (int set = 0; set < 20; ++set) {
    const std::size_t n = 200 + 100 * set;
    std::vector<double> g(n), w(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = set % 2 ? heavy(gen) : std::pow(unif(gen), -0.7);
      w[i] = unif(gen);
      total += w[i];
    }
    for (auto& x : w) x /= total;
    const auto theta = construct_theta(g, w);
    double integral = 0.0;
    for (std::size_t i = 0; i < n; ++i) integral += w[i] * theta(g[i]);
    worst_integral = std::max(worst_integral, integral);
    for (std::size_t j = 1; j < theta.levels.size(); ++j) convex = convex && theta.levels[j] > theta.levels[j - 1];
    const auto slopes = theta.slopes();
    for (std::size_t j = 1; j < slopes.size(); ++j) diverging = diverging && slopes[j] > slopes[j - 1];
    diverging = diverging && slopes.back() >= 60.0;
    // midpoint convexity on a probe grid
    for (double x = 0.0; x < 2.0 * theta.levels.back(); x += theta.levels.back() / 97.0) {
      convex = convex && theta(x + 0.2) - 2.0 * theta(x + 0.1) + theta(x) >= -1e-9;
    }
  }
  c.note("20 random sets: max int theta(g)=" + fmt(worst_integral));
  c.check(worst_integral <= 1.0, "int theta(g) <= 1");
  c.check(convex, "convexity");
  c.check(diverging, "slope divergence");
  return c.report();
}

bool projection() {
  Criterion c("projected equation (n=4, Gibbs-Hartree) and mollification bound (R^2 rotation)");
  auto cfg = gibbs_hartree("project");
  cfg.N = 16;
  cfg.n = 4;
  const auto out = execute(cfg);
  c.note("extrapolated z=" + fmt(out.summary["z"].get<double>()));
  c.check(std::abs(out.summary["z"].get<double>()) <= 3.0, "|z| <= 3 after bandwidth extrapolation");
  const double lhs = out.summary["contraction_lhs"].get<double>();
  const double rhs = out.summary["contraction_rhs"].get<double>();
  const double se = out.summary["contraction_se"].get<double>();
  c.note("contraction " + fmt(lhs) + " <= " + fmt(rhs) + " (SE " + fmt(se, 2) + ")");
  c.check(lhs <= rhs + 3.0 * se, "contraction within 3 SE");

  auto mcfg = default_config("mollify");
  mcfg.vfield = "rotation";
  const auto mol = execute(mcfg);
  require_verdict(c, mol, "norm_bound_slack", "");
  require_verdict(c, mol, "theta_bound_slack", "");
  require_verdict(c, mol, "grid_mass_error", "");
  return c.report();
}

bool msqg() {
  Criterion c("mSQG stationarity (enstrophy Gaussian, N=16, count=1e4, delta in {0.5, 1})");
  for (double delta : {0.5, 1.0}) {
    auto cfg = default_config("verify-liouville");
    cfg.d = 2;
    cfg.N = 16;
    cfg.s = 0.0;
    cfg.kind = "laplacian_mean_zero";
    cfg.measure = "enstrophy";
    cfg.count = 10000;
    cfg.delta = delta;
    cfg.t_end = 1.0;
    const auto out = execute(cfg);
    const std::string tag = "delta=" + fmt(delta, 2);
    c.check(out.records.size() == 3, tag + " three cylindrical F");
    c.note(tag + " max|z|=" + fmt(max_record_abs_z(out)));
    c.check(max_record_abs_z(out) <= 3.0, tag + " within 3 SE of 0");
    require_verdict(c, out, "max_enstrophy_drift", tag);
  }
  return c.report();
}

// observed order from errors at h and h/2
double order(double coarse, double fine) { return std::log2(coarse / fine); }

bool hygiene() {
  Criterion c("numerical hygiene (FD order 2, Verlet/Strang order 2, RK4 order 4, thread bit-reproducibility)");
  std::mt19937_64 gen(7);
  std::normal_distribution<double> normal(0.0, 0.4);
  auto random_field = [&](const ModelPtr& m) {
    Field u(m);
    for (auto& z : u.coeffs) z = {normal(gen), normal(gen)};
    return u;
  };

  // nonlinear energies and cylindrical test functions
  double lo = INFINITY, hi = -INFINITY;
  for (int d : {1, 2}) {
    auto m = build_model(d, 4, d == 1 ? 0.0 : 0.5, OperatorKind::laplacian_plus_one);
    for (auto kind : {NonlinearityKind::hartree, NonlinearityKind::hartree_wick, NonlinearityKind::nls_power,
                      NonlinearityKind::nls_wick}) {
      const NonlinearFunctional h(m, make_nonlinearity(*m, kind, 2));
      const auto u = random_field(m), v = random_field(m);
      const double exact = real_pairing(h.gradient(u), v);
      auto err = [&](double e) {
        return std::abs((h.energy(u + cplx(e) * v) - h.energy(u - cplx(e) * v)) / (2.0 * e) - exact);
      };
      const double p = order(err(2e-2), err(1e-2));
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    for (const auto& F : standard_catalog(*m)) {
      const auto u = random_field(m), v = random_field(m);
      const double exact = F.directional(u, v);
      auto err = [&](double e) { return std::abs((F.eval(u + cplx(e) * v) - F.eval(u - cplx(e) * v)) / (2.0 * e) - exact); };
      const double p = order(err(2e-2), err(1e-2));
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
  }
  c.note("gradient FD orders in [" + fmt(lo, 3) + ", " + fmt(hi, 3) + "]");
  c.check(lo >= 1.8 && hi <= 2.2, "gradient FD order 2");

  // Verlet on the harmonic oscillator
  OdeHamiltonianSpec harmonic;
  harmonic.d = 1;
  harmonic.singular = false;
  auto verlet_err = [&](double dt) {
    const auto traj = integrate_hamiltonian_ode(harmonic, std::vector<double>{1.0, 0.5}, 2.0, dt);
    return std::abs(traj.final_state()[0] - (std::cos(4.0) + 0.5 * std::sin(4.0)));
  };
  const double verlet = order(verlet_err(1e-2), verlet_err(5e-3));

  // Strang on NLS against a fine reference
  auto m1 = build_model(1, 8, 0.0, OperatorKind::laplacian_plus_one);
  const NonlinearFunctional nls(m1, make_nonlinearity(*m1, NonlinearityKind::nls_power, 2));
  const auto u1 = random_field(m1);
  const auto ref = advance_interaction(nls, u1, 1.0, 1.25e-3);
  auto strang_err = [&](double dt) { return sobolev_norm(advance_interaction(nls, u1, 1.0, dt) - ref, 0.0); };
  const double strang = order(strang_err(2e-2), strang_err(1e-2));

  // RK4 on mSQG
  auto m2 = build_model(2, 6, 0.0, OperatorKind::laplacian_mean_zero);
  const MsqgField field(m2, 1.0);
  const auto u2 = sample_enstrophy_gaussian(m2, 1, 3).samples.front();
  const auto ref2 = integrate_msqg(field, u2, 1.0, 1.25e-3).final_state();
  auto rk_err = [&](double dt) { return sobolev_norm(integrate_msqg(field, u2, 1.0, dt).final_state() - ref2, 0.0); };
  const double rk4 = order(rk_err(2e-2), rk_err(1e-2));
  c.note("Verlet order " + fmt(verlet, 3) + ", Strang order " + fmt(strang, 3) + ", RK4 order " + fmt(rk4, 3));
  c.check(std::abs(verlet - 2.0) <= 0.2, "Verlet order 2");
  c.check(std::abs(strang - 2.0) <= 0.2, "Strang order 2");
  c.check(std::abs(rk4 - 4.0) <= 0.3, "RK4 order 4");

  // identical results.json for 1, 2 and 4 threads
  std::vector<ExperimentConfig> configs;
  auto null_cfg = liouville_config();
  null_cfg.count = 2000;
  configs.push_back(null_cfg);
  auto gibbs_cfg = gibbs_hartree("verify-liouville");
  gibbs_cfg.count = 1000;
  gibbs_cfg.times = {0.5};
  configs.push_back(gibbs_cfg);
  auto ce_cfg = default_config("counterexample");
  ce_cfg.count = 2000;
  configs.push_back(ce_cfg);
  std::size_t identical = 0;
  for (const auto& cfg : configs) {
    std::vector<std::string> docs;
    for (unsigned threads : {1u, 2u, 4u}) {
      set_max_threads(threads);
      docs.push_back(results_json(cfg, execute(cfg)));
    }
    if (docs[0] == docs[1] && docs[0] == docs[2]) ++identical;
  }
  set_max_threads(0);
  c.note(std::to_string(identical) + "/3 configs bit-identical across 1/2/4 threads");
  c.check(identical == configs.size(), "bit-reproducibility across thread counts");
  return c.report();
}

bool negative_controls() {
  Criterion c("negative controls (sign-flipped field, mismatched measure) on displaced Gibbs-Hartree");
  for (const std::string control : {"flip", "mismatch"}) {
    auto cfg = gibbs_hartree("verify-liouville");
    cfg.N = 16;
    cfg.count = 10000;
    cfg.displacement = 1.0;
    cfg.times = {0.0};
    cfg.control = control;
    const auto out = execute(cfg);
    const double z = max_record_abs_z(out);
    c.note(control + " max|z|=" + fmt(z));
    c.check(z > 5.0, control + " |z| > 5");
  }
  return c.report();
}

}  // namespace

int main() {
  const std::vector<std::function<bool()>> criteria = {null_stationarity, gibbs_identity, gibbs_invariance,
                                                       counterexample,    integrability,  omega_theta,
                                                       projection,        msqg,           hygiene,
                                                       negative_controls};
  int failed = 0;
  for (const auto& run : criteria) {
    try {
      if (!run()) ++failed;
    } catch (const std::exception& e) {
      std::cout << "FAIL criterion raised: " << e.what() << std::endl;
      ++failed;
    }
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
