#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace liouvlab {

/// Invalid configuration; `line` is 1-based in the source file (0 when the
/// value did not come from a file line).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0, std::string key = {})
      : std::runtime_error(what), line(line), key(std::move(key)) {}
  int line;
  std::string key;
};

extern const std::vector<std::string> kExperiments;

struct ExperimentConfig {
  std::string experiment = "verify-liouville";

  // [model]
  int d = 1;
  int N = 16;
  double s = 0.0;
  std::string kind = "laplacian_plus_one";

  // [nonlinearity]
  std::string nonlinearity = "none";
  int r = 2;
  std::string potential = "default";  // default | gaussian | bracket_power
  double potential_decay = 1.0;

  // [measure]
  std::string measure = "gaussian";  // gaussian | gibbs | enstrophy | standard_normal
  std::uint64_t count = 10000;
  std::uint64_t seed = 1;
  double displacement = 0.0;  // real shift of the first three modes

  // [flow]
  std::string flow = "auto";  // auto | linear | interaction | msqg | counterexample | ode
  double delta = 1.0;
  double t_end = 1.0;
  double dt = 1e-3;
  std::vector<double> dt_fd = {1e-2, 5e-3};
  std::vector<double> times = {0.0, 0.5, 1.0};
  double horizon = 10.0;
  std::uint64_t refine_count = 500;  // subset rerun at dt/2 (invariance)

  // [control]
  std::string control = "none";  // none | flip | mismatch | drift
  double control_drift = 1.0;

  // [projection]
  std::uint64_t n = 4;
  std::vector<double> bandwidths = {0.4, 0.3, 0.2};

  // [mollify]
  double eps = 0.3;
  double spacing = 0.075;
  std::string vfield = "rotation";  // rotation | constant | sign

  // [integrability]
  std::vector<double> windows = {8, 16, 32, 64, 128, 256};
  std::vector<double> clips = {1e2, 1e3, 1e4, 1e5, 1e6};

  // [counterexample]
  double q0 = 1.0;
  double p0 = 0.0;

  // [ode]
  int ode_d = 5;
  std::string phi = "quadratic";
  double alpha = 0.25;
  double beta = 1.0;

  // [tolerances]
  double z_max = 3.0;
  double z_control = 5.0;
  double halving_min = 3.5;
  double mass_tol = 1e-8;
  double enstrophy_tol = 1e-6;
  double cauchy_tol = 0.01;
  double slack_tol = 1e-3;
  double bracket_width = 1e-3;
  double ess_warn = 0.01;
  double excluded_warn = 0.05;

  // [output]
  std::string out = "liouvlab-out";
  std::uint64_t threads = 0;  // 0: hardware concurrency

  /// Source line of each key read from a file ("section.key" -> line).
  std::map<std::string, int> lines;

  /// Flow actually used when flow.kind = "auto".
  std::string resolved_flow() const;

  /// Throws ConfigError naming the offending key (and line if known).
  void validate() const;
  /// Full config in TOML form; parse_toml(to_toml()) reproduces it.
  std::string to_toml() const;
  std::string to_json() const;

  bool operator==(const ExperimentConfig& other) const;
};

/// Defaults for one experiment (full-scale counts and flows).
ExperimentConfig default_config(const std::string& experiment);

/// Overlays the values of a TOML (or JSON, chosen by content) document onto
/// `base`. Unknown keys and type mismatches raise ConfigError with the line.
ExperimentConfig parse_toml(const std::string& text, ExperimentConfig base = {});
ExperimentConfig parse_json(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base);

}  // namespace liouvlab
